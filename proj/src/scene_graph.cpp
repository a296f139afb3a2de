// SPDX-License-Identifier: Apache-2.0
#include "ghr/scene_graph.hpp"

#include <cmath>
#include <unordered_set>

#include "ghr/error.hpp"

namespace ghr {

namespace {

std::vector<std::string> string_array(const json& doc, const char* key, bool required) {
    if (!doc.contains(key)) {
        if (required) {
            throw Error(ErrorCode::MalformedDocument, std::string("missing \"") + key + "\" array");
        }
        return {};
    }
    const json& arr = doc.at(key);
    if (!arr.is_array()) {
        throw Error(ErrorCode::MalformedDocument, std::string("\"") + key + "\" must be an array");
    }
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw Error(ErrorCode::MalformedDocument,
                        std::string("\"") + key + "\" must contain only strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

int integer_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number_integer()) {
        throw Error(ErrorCode::MalformedDocument,
                    where + ": expected integer field \"" + key + "\"");
    }
    const auto v = obj.at(key).get<long long>();
    if (v < 0 || v > 0x7fffffff) {
        throw Error(ErrorCode::MalformedDocument, where + ": \"" + key + "\" out of range");
    }
    return static_cast<int>(v);
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) {
        throw Error(ErrorCode::MalformedDocument,
                    where + ": expected string field \"" + key + "\"");
    }
    return obj.at(key).get<std::string>();
}

void check_bbox(const BBox& b, const std::string& where) {
    const bool finite = std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) &&
                        std::isfinite(b.h);
    if (!finite || b.x < 0.0 || b.y < 0.0 || b.w <= 0.0 || b.h <= 0.0 ||
        b.x + b.w > 1.0 + kBBoxTolerance || b.y + b.h > 1.0 + kBBoxTolerance) {
        throw Error(ErrorCode::MalformedBBox, where + ": bbox outside the unit square");
    }
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> objects, std::vector<std::string> predicates,
                       std::vector<std::string> human_classes)
    : objects_(std::move(objects)),
      predicates_(std::move(predicates)),
      human_names_(std::move(human_classes)) {
    for (std::size_t i = 0; i < objects_.size(); ++i) {
        if (!object_lookup_.emplace(objects_[i], static_cast<int>(i)).second) {
            throw Error(ErrorCode::DuplicateClass, "object class \"" + objects_[i] + "\"");
        }
    }
    for (std::size_t i = 0; i < predicates_.size(); ++i) {
        if (!predicate_lookup_.emplace(predicates_[i], static_cast<int>(i)).second) {
            throw Error(ErrorCode::DuplicateClass, "predicate \"" + predicates_[i] + "\"");
        }
    }
    human_mask_.assign(objects_.size(), false);
    std::unordered_set<std::string> seen;
    for (const auto& name : human_names_) {
        if (!seen.insert(name).second) {
            throw Error(ErrorCode::DuplicateClass, "human class \"" + name + "\"");
        }
        const int idx = object_index(name);
        if (idx < 0) {
            throw Error(ErrorCode::UnknownHumanClass, "\"" + name + "\" is not an object class");
        }
        human_mask_[static_cast<std::size_t>(idx)] = true;
    }
}

int Vocabulary::object_index(const std::string& name) const {
    const auto it = object_lookup_.find(name);
    return it == object_lookup_.end() ? -1 : it->second;
}

int Vocabulary::predicate_index(const std::string& name) const {
    const auto it = predicate_lookup_.find(name);
    return it == predicate_lookup_.end() ? -1 : it->second;
}

bool Vocabulary::is_human(std::size_t class_index) const {
    return class_index < human_mask_.size() && human_mask_[class_index];
}

json Vocabulary::to_json() const {
    return json{{"objects", objects_}, {"predicates", predicates_}, {"human_classes", human_names_}};
}

int FrameSceneGraph::position_of(int node_id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].node_id == node_id) return static_cast<int>(i);
    }
    return -1;
}

Vocabulary parse_vocabulary(const json& doc) {
    if (!doc.is_object()) {
        throw Error(ErrorCode::MalformedDocument, "vocabulary must be a JSON object");
    }
    auto objects = string_array(doc, "objects", true);
    auto predicates = string_array(doc, "predicates", true);
    auto humans = doc.contains("human_classes") ? string_array(doc, "human_classes", true)
                                                : std::vector<std::string>{"person"};
    return Vocabulary(std::move(objects), std::move(predicates), std::move(humans));
}

FrameSceneGraph parse_frame_graph(const json& doc, const Vocabulary& vocab) {
    if (!doc.is_object()) {
        throw Error(ErrorCode::MalformedDocument, "frame must be a JSON object");
    }
    FrameSceneGraph g;
    g.frame_id = string_field(doc, "frame_id", "frame");
    const std::string where = "frame \"" + g.frame_id + "\"";

    double scale_x = 1.0;
    double scale_y = 1.0;
    if (doc.contains("width") || doc.contains("height")) {
        if (!doc.contains("width") || !doc.contains("height") || !doc["width"].is_number() ||
            !doc["height"].is_number() || doc["width"].get<double>() <= 0.0 ||
            doc["height"].get<double>() <= 0.0) {
            throw Error(ErrorCode::MalformedDocument,
                        where + ": \"width\" and \"height\" must both be positive numbers");
        }
        scale_x = 1.0 / doc["width"].get<double>();
        scale_y = 1.0 / doc["height"].get<double>();
    }

    if (!doc.contains("objects") || !doc["objects"].is_array()) {
        throw Error(ErrorCode::MalformedDocument, where + ": missing \"objects\" array");
    }
    for (const auto& obj : doc["objects"]) {
        EntityNode node;
        node.node_id = integer_field(obj, "id", where);
        const std::string label = string_field(obj, "label", where);
        const int cls = vocab.object_index(label);
        if (cls < 0) {
            throw Error(ErrorCode::UnknownClass, where + ": unknown object class \"" + label + "\"");
        }
        node.class_index = static_cast<std::size_t>(cls);
        if (!obj.contains("bbox") || !obj["bbox"].is_array() || obj["bbox"].size() != 4) {
            throw Error(ErrorCode::MalformedBBox, where + ": bbox must be [x, y, w, h]");
        }
        std::array<double, 4> v{};
        for (std::size_t i = 0; i < 4; ++i) {
            if (!obj["bbox"][i].is_number()) {
                throw Error(ErrorCode::MalformedBBox, where + ": bbox entries must be numbers");
            }
            v[i] = obj["bbox"][i].get<double>();
        }
        node.bbox = BBox{v[0] * scale_x, v[1] * scale_y, v[2] * scale_x, v[3] * scale_y};
        g.nodes.push_back(node);
    }

    if (doc.contains("relationships")) {
        if (!doc["relationships"].is_array()) {
            throw Error(ErrorCode::MalformedDocument, where + ": \"relationships\" must be an array");
        }
        for (const auto& rel : doc["relationships"]) {
            RelationEdge e;
            e.subject_id = integer_field(rel, "subject", where);
            e.object_id = integer_field(rel, "object", where);
            const std::string pred = string_field(rel, "predicate", where);
            const int p = vocab.predicate_index(pred);
            if (p < 0) {
                throw Error(ErrorCode::UnknownClass, where + ": unknown predicate \"" + pred + "\"");
            }
            e.predicate_index = static_cast<std::size_t>(p);
            g.edges.push_back(e);
        }
    }

    validate_frame(g, vocab);
    return g;
}

void validate_frame(const FrameSceneGraph& g, const Vocabulary& vocab) {
    const std::string where = "frame \"" + g.frame_id + "\"";
    std::unordered_set<int> ids;
    for (const auto& n : g.nodes) {
        if (n.node_id < 0) {
            throw Error(ErrorCode::MalformedDocument, where + ": negative node id");
        }
        if (!ids.insert(n.node_id).second) {
            throw Error(ErrorCode::DuplicateNodeId,
                        where + ": node id " + std::to_string(n.node_id) + " repeated");
        }
        if (n.class_index >= vocab.num_objects()) {
            throw Error(ErrorCode::UnknownClass, where + ": class index out of range");
        }
        check_bbox(n.bbox, where + " node " + std::to_string(n.node_id));
    }
    for (const auto& e : g.edges) {
        if (!ids.count(e.subject_id) || !ids.count(e.object_id)) {
            const int missing = ids.count(e.subject_id) ? e.object_id : e.subject_id;
            throw Error(ErrorCode::DanglingEdge,
                        where + ": edge references absent node " + std::to_string(missing));
        }
        if (e.subject_id == e.object_id) {
            throw Error(ErrorCode::SelfLoop,
                        where + ": self-loop on node " + std::to_string(e.subject_id));
        }
        if (e.predicate_index >= vocab.num_predicates()) {
            throw Error(ErrorCode::UnknownClass, where + ": predicate index out of range");
        }
    }
}

json frame_to_json(const FrameSceneGraph& g, const Vocabulary& vocab) {
    json objects = json::array();
    for (const auto& n : g.nodes) {
        objects.push_back({{"id", n.node_id},
                           {"label", vocab.object_classes().at(n.class_index)},
                           {"bbox", {n.bbox.x, n.bbox.y, n.bbox.w, n.bbox.h}}});
    }
    json rels = json::array();
    for (const auto& e : g.edges) {
        rels.push_back({{"subject", e.subject_id},
                        {"predicate", vocab.predicate_classes().at(e.predicate_index)},
                        {"object", e.object_id}});
    }
    return json{{"frame_id", g.frame_id}, {"objects", objects}, {"relationships", rels}};
}

FrameStats frame_stats(const FrameSceneGraph& g, const Vocabulary& vocab) {
    FrameStats s;
    s.node_count = g.nodes.size();
    s.edge_count = g.edges.size();
    for (const auto& n : g.nodes) {
        if (vocab.is_human(n.class_index)) ++s.human_count;
    }
    return s;
}

}  // namespace ghr
