// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ghr/question.hpp"
#include "ghr/scene_graph.hpp"
#include "ghr/video_graph.hpp"

namespace ghr {

/// Reasoning categories used for the per-category metric breakdown; "other"
/// collects samples without a label.
inline constexpr std::array<std::string_view, 9> kCategories = {
    "obj-rel",    "rel-action", "obj-action", "superlative", "sequencing",
    "exists",     "duration",   "activity",   "other"};

std::size_t category_index(std::string_view name);

struct QaSample {
    std::string qa_id;
    std::string video_id;
    std::string question;
    std::size_t answer_index = 0;
    std::size_t category = kCategories.size() - 1;
};

struct DatasetPaths {
    std::filesystem::path video_dir;
    std::filesystem::path qa_path;
    std::filesystem::path vocab_path;
    std::filesystem::path answers_path;
    std::optional<std::filesystem::path> split_path;
    /// Precomputed question embeddings; toy hashing embeddings when absent.
    std::optional<std::filesystem::path> embeddings_path;

    /// Layout written by the synthetic generator: vocab.json, answers.json,
    /// qa.jsonl, videos/ and, when present, split.json and embeddings.ghrq.
    static DatasetPaths standard(const std::filesystem::path& dir);
};

struct Dataset {
    Vocabulary vocab;
    std::vector<std::string> answers;
    std::map<std::string, VideoGraph> videos;
    std::vector<QaSample> train;
    std::vector<QaSample> eval;
    EmbeddingMap questions;

    const VideoGraph& video(const std::string& id) const;
    const QaSample* find(const std::string& qa_id) const;
};

/// Loads and cross-validates every file. Without a split manifest all
/// samples are training samples.
Dataset load_dataset(const DatasetPaths& paths, std::size_t question_dim,
                     NoHumanPolicy policy = NoHumanPolicy::Skip);

std::vector<std::string> parse_answers(const json& doc);

struct SplitManifest {
    std::vector<std::string> train;
    std::vector<std::string> eval;
};

/// Rejects a video id listed in both splits with SplitLeakage.
SplitManifest parse_split(const json& doc);

json read_json_file(const std::filesystem::path& path);
/// Reads a JSON-lines file; blank lines are skipped.
std::vector<json> read_json_lines(const std::filesystem::path& path);

}  // namespace ghr
