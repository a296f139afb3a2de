// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ghr/scene_graph.hpp"

namespace ghr {

enum class NoHumanPolicy { Skip, SyntheticRoot };

/// Relation label carried by an edge of the flattened video graph: either a
/// vocabulary predicate or the reserved human-to-global-root link.
struct EdgeLabel {
    static constexpr std::size_t kRootLink = static_cast<std::size_t>(-1);
    std::size_t predicate = kRootLink;

    bool is_root_link() const { return predicate == kRootLink; }
    bool operator==(const EdgeLabel&) const = default;
};

/// Undirected edge between two flat node indices.
struct FlatEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    EdgeLabel label;

    bool operator==(const FlatEdge&) const = default;
};

enum class FlatNodeKind : std::uint8_t { Entity, SyntheticHuman, GlobalRoot };

struct FlatNode {
    FlatNodeKind kind = FlatNodeKind::Entity;
    std::size_t frame = 0;        // meaningless for the global root
    std::size_t class_index = 0;  // Entity only
    BBox bbox;                    // Entity only
    int node_id = -1;             // Entity only

    bool operator==(const FlatNode&) const = default;
};

/// The human-rooted video-level graph. Frames keep their original node order;
/// flat node indices enumerate frame 0's nodes (plus its synthetic human, if
/// any), then frame 1's, ..., and finally the global root.
class VideoGraph {
public:
    struct HumanRoot {
        std::optional<int> node_id;  // nullopt marks a synthetic placeholder
        bool operator==(const HumanRoot&) const = default;
    };

    VideoGraph(std::string video_id, std::vector<FrameSceneGraph> frames,
               std::vector<HumanRoot> human_roots, std::size_t skipped_frames = 0);

    const std::string& video_id() const { return video_id_; }
    const std::vector<FrameSceneGraph>& frames() const { return frames_; }
    const std::vector<HumanRoot>& human_roots() const { return roots_; }
    std::size_t num_frames() const { return frames_.size(); }
    std::size_t skipped_frames() const { return skipped_; }

    const std::vector<FlatNode>& nodes() const { return nodes_; }
    const std::vector<FlatEdge>& edges() const { return edges_; }
    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_edges() const { return edges_.size(); }

    std::size_t global_root() const { return nodes_.size() - 1; }
    std::size_t human_root(std::size_t frame) const { return human_flat_.at(frame); }
    /// Flat index of the entity `node_id` in retained frame `frame`.
    std::size_t flat_index(std::size_t frame, int node_id) const;
    /// First flat index of `frame` and number of flat nodes it owns.
    std::size_t frame_offset(std::size_t frame) const { return offsets_.at(frame); }
    std::size_t frame_size(std::size_t frame) const {
        return offsets_.at(frame + 1) - offsets_.at(frame);
    }

    /// (frame_index, human flat index) for every root link, in frame order.
    std::vector<std::pair<std::size_t, std::size_t>> root_edges() const;

    bool operator==(const VideoGraph& other) const {
        return video_id_ == other.video_id_ && frames_ == other.frames_ && roots_ == other.roots_;
    }

private:
    std::string video_id_;
    std::vector<FrameSceneGraph> frames_;
    std::vector<HumanRoot> roots_;
    std::size_t skipped_ = 0;

    std::vector<FlatNode> nodes_;
    std::vector<FlatEdge> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> human_flat_;
};

/// Contiguous windows of exactly `clip_length` frame indices; the last one is
/// padded by repeating its final frame.
struct ClipPlan {
    std::size_t clip_length = 0;
    std::vector<std::vector<std::size_t>> clips;
};

/// Human node with the largest box area (ties: smallest node id), or nullopt.
std::optional<int> select_human_root(const FrameSceneGraph& g, const Vocabulary& vocab);

VideoGraph build_video_graph(std::string video_id, const std::vector<FrameSceneGraph>& frames,
                             const Vocabulary& vocab,
                             NoHumanPolicy policy = NoHumanPolicy::Skip);

ClipPlan plan_clips(const VideoGraph& vg, std::size_t clip_length);
ClipPlan plan_clips(std::size_t num_frames, std::size_t clip_length);

/// Shortest undirected path length between flat nodes, or nullopt when
/// unreachable. `removed` optionally excludes one node from the traversal.
std::optional<std::size_t> bfs_distance(const VideoGraph& vg, std::size_t a, std::size_t b,
                                        std::optional<std::size_t> removed = std::nullopt);

/// Video document: {"video_id": str, "frames": [frame, ...]}.
VideoGraph parse_video(const json& doc, const Vocabulary& vocab,
                       NoHumanPolicy policy = NoHumanPolicy::Skip);
std::vector<FrameSceneGraph> parse_video_frames(const json& doc, const Vocabulary& vocab,
                                                std::string* video_id);

/// Binary cache: "GHRG", u8 version, then the vocabulary and graph.
inline constexpr std::uint8_t kGraphCacheVersion = 1;
void write_graph_cache(const std::filesystem::path& path, const VideoGraph& vg,
                       const Vocabulary& vocab);
struct GraphCache {
    Vocabulary vocab;
    VideoGraph graph;
};
GraphCache read_graph_cache(const std::filesystem::path& path);

}  // namespace ghr
