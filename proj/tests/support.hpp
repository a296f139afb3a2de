// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ghr/crn.hpp"
#include "ghr/error.hpp"
#include "ghr/model.hpp"
#include "ghr/params.hpp"
#include "ghr/sgem.hpp"
#include "ghr/video_graph.hpp"

namespace ghr::testing {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

/// "person" plus n_objects - 1 other classes; predicates "rel0", "rel1", ...
Vocabulary make_vocab(std::size_t n_objects, std::size_t n_predicates);

struct RandomFrameOptions {
    std::size_t max_frames = 3;
    std::size_t max_nodes = 6;
    double edge_prob = 0.4;
    /// Probability that a frame has no human at all.
    double humanless_prob = 0.0;
    /// Probability of a second person in a frame.
    double second_human_prob = 0.2;
};

FrameSceneGraph random_frame(std::mt19937_64& rng, const Vocabulary& vocab, std::size_t max_nodes,
                             double edge_prob, bool with_human, bool second_human,
                             const std::string& frame_id);
std::vector<FrameSceneGraph> random_frames(std::mt19937_64& rng, const Vocabulary& vocab,
                                           const RandomFrameOptions& opt);
/// Random video with at least one human-bearing frame.
VideoGraph random_video(std::mt19937_64& rng, const Vocabulary& vocab, const RandomFrameOptions& opt,
                        const std::string& id = "v");

/// Same frames with node ids relabelled by a random injective map and node
/// and edge lists shuffled.
std::vector<FrameSceneGraph> permute_ids(std::mt19937_64& rng, const std::vector<FrameSceneGraph>& frames);

Mat to_mat(const Tensor<float>& t);
Mat to_mat(const Tensor<double>& t);

struct DenseAttention {
    std::size_t layer = 0;
    std::size_t node = 0;
    std::size_t relation = 0;
    std::size_t head = 0;
    std::vector<std::size_t> neighbors;
    Vec alpha;
};

struct DenseEncoding {
    Mat nodes;   // final node embeddings
    Mat frames;  // human-root rows
    std::vector<DenseAttention> attention;
};

/// Loop-by-loop evaluation of the attention encoder straight from the video
/// graph and named parameters, in double precision.
template <typename T>
DenseEncoding dense_encode(const VideoGraph& vg, const Vocabulary& vocab, const ParamStore<T>& params,
                           const SgemConfig& config);

/// Pooled-MLP relation unit evaluated with explicit loops over every subset
/// of each order (exhaustive enumeration only).
Mat dense_crn_unit(const Mat& inputs, const Vec& condition, const std::vector<std::pair<Mat, Vec>>& g,
                   const std::vector<std::pair<Mat, Vec>>& p, const std::vector<std::size_t>& orders);

template <typename T>
std::vector<std::pair<Mat, Vec>> mlp_layers(const Mlp<T>& m);

/// Narrow model used by the training tests.
ModelConfig tiny_model(HeadKind head, std::size_t answers, std::size_t d_q);

double max_abs_diff(const Mat& a, const Mat& b);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Code of the ghr::Error thrown by f, or nullopt when nothing is thrown.
template <typename F>
std::optional<ErrorCode> error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p);

}  // namespace ghr::testing
