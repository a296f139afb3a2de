// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ghr/scene_graph.hpp"
#include "ghr/video_graph.hpp"

namespace ghr {

struct SyntheticOptions {
    std::uint64_t seed = 7;
    std::size_t videos = 50;
    std::size_t frames = 8;
    std::size_t objects = 10;  // including the "person" class
    std::size_t predicates = 5;
    std::size_t answers = 8;
    /// Questions name two predicates whose evidence sits in different frames.
    bool cross_frame = false;
    double eval_fraction = 0.2;

    void validate() const;
};

struct SyntheticData {
    Vocabulary vocab;
    std::vector<std::string> answers;
    std::vector<json> videos;  // one video document each
    std::vector<json> qa;      // QA records
    json split;
};

struct SyntheticStats {
    std::size_t videos = 0;
    std::size_t train_videos = 0;
    std::size_t eval_videos = 0;
    std::size_t frames = 0;
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t questions = 0;
    std::vector<std::size_t> answer_counts;

    json to_json() const;
};

/// "person" followed by household object names; predicates are gerunds.
Vocabulary synthetic_vocabulary(std::size_t objects, std::size_t predicates);

SyntheticData make_synthetic(const SyntheticOptions& options);
SyntheticStats synthetic_stats(const SyntheticData& data);

/// Writes vocab.json, answers.json, qa.jsonl, split.json and videos/<id>.json
/// under `out`. Stale video files in `out`/videos are removed first.
SyntheticStats generate_synthetic(const SyntheticOptions& options, const std::filesystem::path& out);

/// Answers a generated question from the graph alone: the object class linked
/// to a human root by every predicate named in the question. nullopt when the
/// question names no predicate or the evidence is ambiguous.
std::optional<std::string> rule_oracle(const VideoGraph& vg, const Vocabulary& vocab,
                                       std::string_view question);

}  // namespace ghr
