// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace ghr {

using json = nlohmann::json;

/// Object classes and relationship predicates. A class index is its position
/// in the ordered list.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> objects, std::vector<std::string> predicates,
               std::vector<std::string> human_classes = {"person"});

    const std::vector<std::string>& object_classes() const { return objects_; }
    const std::vector<std::string>& predicate_classes() const { return predicates_; }
    const std::vector<std::string>& human_class_names() const { return human_names_; }

    std::size_t num_objects() const { return objects_.size(); }
    std::size_t num_predicates() const { return predicates_.size(); }

    /// Returns -1 when the name is not in the vocabulary.
    int object_index(const std::string& name) const;
    int predicate_index(const std::string& name) const;
    bool is_human(std::size_t class_index) const;

    json to_json() const;

    bool operator==(const Vocabulary& other) const {
        return objects_ == other.objects_ && predicates_ == other.predicates_ &&
               human_names_ == other.human_names_;
    }

private:
    std::vector<std::string> objects_;
    std::vector<std::string> predicates_;
    std::vector<std::string> human_names_;
    std::unordered_map<std::string, int> object_lookup_;
    std::unordered_map<std::string, int> predicate_lookup_;
    std::vector<bool> human_mask_;
};

/// Normalized (x, y, w, h) box.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    bool operator==(const BBox&) const = default;
};

struct EntityNode {
    int node_id = 0;
    std::size_t class_index = 0;
    BBox bbox;

    bool operator==(const EntityNode&) const = default;
};

/// Stored as the annotated (subject, predicate, object) triplet; message
/// passing treats it as undirected.
struct RelationEdge {
    int subject_id = 0;
    std::size_t predicate_index = 0;
    int object_id = 0;

    bool operator==(const RelationEdge&) const = default;
};

struct FrameSceneGraph {
    std::string frame_id;
    std::vector<EntityNode> nodes;
    std::vector<RelationEdge> edges;

    /// Position of `node_id` in `nodes`, or -1.
    int position_of(int node_id) const;

    bool operator==(const FrameSceneGraph&) const = default;
};

struct FrameStats {
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    std::size_t human_count = 0;

    bool operator==(const FrameStats&) const = default;
};

inline constexpr double kBBoxTolerance = 1e-6;

Vocabulary parse_vocabulary(const json& doc);

/// Parses one frame. When the document carries "width" and "height", boxes
/// are read as pixels and normalized.
FrameSceneGraph parse_frame_graph(const json& doc, const Vocabulary& vocab);

/// Inverse of parse_frame_graph (normalized coordinates, no width/height).
json frame_to_json(const FrameSceneGraph& g, const Vocabulary& vocab);

/// Checks every FrameSceneGraph invariant; throws ghr::Error on violation.
void validate_frame(const FrameSceneGraph& g, const Vocabulary& vocab);

FrameStats frame_stats(const FrameSceneGraph& g, const Vocabulary& vocab);

}  // namespace ghr
