// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ghr/params.hpp"
#include "ghr/tensor.hpp"
#include "ghr/video_graph.hpp"

namespace ghr {

struct CrnConfig {
    std::size_t d = 64;
    /// Empty: {1, ..., max(1, min(n - 1, k_max))} for a unit of arity n.
    std::vector<std::size_t> orders;
    std::size_t k_max = 4;
    std::size_t subsets = 3;  // t
    std::size_t clip_length = 4;
    std::size_t g_depth = 1;
    std::size_t p_depth = 1;
    std::uint64_t seed = 0;

    /// Relation orders used by a unit of arity n, ascending.
    std::vector<std::size_t> orders_for(std::size_t n) const;
    void validate() const;
};

using Subset = std::vector<std::size_t>;

/// Binomial coefficient saturating at SIZE_MAX.
std::size_t binomial(std::size_t n, std::size_t k);

/// t subsets of size k out of {0..n-1}: all of them when C(n, k) <= t,
/// otherwise t distinct uniform draws keyed by (seed, unit_id, k). Each subset
/// is sorted and the list is in lexicographic order.
std::vector<Subset> sample_subsets(std::size_t n, std::size_t k, std::size_t t,
                                   std::uint64_t seed, std::uint64_t unit_id);

/// Unit id of the video-level unit; clip units use their clip index.
inline constexpr std::uint64_t kVideoUnitId = 1u << 20;

/// Stack of Linear + ELU layers.
template <typename T>
struct Mlp {
    std::vector<Tensor<T>> weights;
    std::vector<Tensor<T>> biases;

    Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct CrnUnitWeights {
    Mlp<T> g;  // [mean || max] (2d) -> d
    Mlp<T> p;  // [g || c] (2d) -> d
};

template <typename T>
struct CrnWeights {
    Tensor<T> frame_proj;     // [d_frame x d]
    Tensor<T> question_proj;  // [d_q x d]
    CrnUnitWeights<T> clip;
    CrnUnitWeights<T> video;
    Tensor<T> clip_out_proj;  // [|orders(L)| d x d]
};

/// Registers crn.* parameters.
void register_crn_params(ParamStore<float>& params, const CrnConfig& config,
                         std::size_t d_frame, std::size_t d_q, ParamInit& init);

template <typename T>
CrnWeights<T> bind_crn(const ParamStore<T>& params, const CrnConfig& config);

/// One conditional relation unit over the rows of `inputs` [n x d] with
/// condition `condition` [1 x d]; one [1 x d] vector per order, ascending.
template <typename T>
std::vector<Tensor<T>> crn_unit(const Tensor<T>& inputs, const Tensor<T>& condition,
                                const CrnUnitWeights<T>& w, const CrnConfig& config,
                                std::uint64_t seed, std::uint64_t unit_id);

template <typename T>
struct HierarchyOutput {
    Tensor<T> video;      // [1 x d]
    Tensor<T> condition;  // projected question [1 x d]
};

template <typename T>
HierarchyOutput<T> hierarchy_forward(const Tensor<T>& frame_embeddings, const ClipPlan& clips,
                                     const Tensor<T>& question, const CrnWeights<T>& w,
                                     const CrnConfig& config, std::uint64_t seed);

// Answer decoders. Both are 2-layer MLPs with an ELU hidden activation.

template <typename T>
struct HeadWeights {
    Tensor<T> w1, b1, w2, b2;
    Tensor<T> question_proj;  // MLP baseline only: [d_q x d]
};

enum class HeadKind { Crn, Mlp };

/// head.* parameters. The CRN decoder reads [v || c || v*c] (3d); the MLP
/// baseline reads [aggregate || projected question] (d_frame + d).
void register_head_params(ParamStore<float>& params, HeadKind kind, std::size_t d,
                          std::size_t d_frame, std::size_t d_q, std::size_t hidden,
                          std::size_t num_answers, ParamInit& init);

template <typename T>
HeadWeights<T> bind_head(const ParamStore<T>& params, HeadKind kind);

template <typename T>
Tensor<T> decode_answer(const Tensor<T>& video, const Tensor<T>& condition,
                        const HeadWeights<T>& w);

template <typename T>
Tensor<T> mlp_baseline_head(const Tensor<T>& aggregate, const Tensor<T>& question,
                            const HeadWeights<T>& w);

}  // namespace ghr
