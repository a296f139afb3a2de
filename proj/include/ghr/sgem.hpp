// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ghr/params.hpp"
#include "ghr/tensor.hpp"
#include "ghr/video_graph.hpp"

namespace ghr {

/// Message-passing variants compared in the ablation table.
enum class EncoderKind {
    HetEdgeGat,  // per-relation parameters
    EdgeGat,     // one shared relation for every edge
    Gine,        // GINE-style sum aggregation without attention
};

enum class FrameReadout {
    HumanRoot,  // final embedding of the frame's human root
    FrameSum,   // sum over every node of the frame
};

struct SgemConfig {
    std::size_t d_node = 64;
    std::size_t d_edge = 32;
    std::size_t heads = 4;
    std::size_t d_head = 16;
    std::size_t n_layers = 2;
    double leaky_slope = 0.2;
    /// Empty: one relation type per predicate. Otherwise predicate index ->
    /// family index, one relation type per family.
    std::vector<std::size_t> predicate_family;
    bool use_bbox_features = true;
    EncoderKind encoder = EncoderKind::HetEdgeGat;
    FrameReadout readout = FrameReadout::HumanRoot;

    std::size_t d_out() const { return heads * d_head; }
    std::size_t layer_input_width(std::size_t layer) const { return layer == 0 ? d_node : d_out(); }
    /// Relation types including the trailing root-link type.
    std::size_t num_relations(std::size_t num_predicates) const;
    std::size_t root_link_relation(std::size_t num_predicates) const {
        return num_relations(num_predicates) - 1;
    }
    /// Relation whose self transform is applied to nodes without any edge.
    std::size_t default_relation(std::size_t num_predicates) const {
        return root_link_relation(num_predicates);
    }
    std::size_t relation_of(const EdgeLabel& label, std::size_t num_predicates) const;

    void validate(std::size_t num_predicates) const;
};

/// Per-video index structures consumed by the encoder; independent of the
/// parameter values.
struct EncoderPlan {
    struct Relation {
        std::size_t relation = 0;
        Index dst;          // message destination (flat node)
        Index src;          // message source (flat node)
        Index edge_row;     // row of the edge-feature table
        Index incident;     // sorted unique destinations
    };

    std::size_t num_nodes = 0;
    std::size_t num_frames = 0;
    Index entity_nodes;             // flat positions of entity nodes
    Index entity_classes;           // their class indices
    std::vector<double> entity_geometry;  // [x, y, w, h, area] per entity
    std::size_t global_root = 0;
    Index human_roots;              // flat index per frame
    Index frame_of_node;            // frame per node (global root excluded)
    Index frame_nodes;              // flat nodes except the global root
    std::vector<Relation> relations;  // only relations with messages, ascending
    Index isolated;                 // nodes without any edge
    Index all_dst, all_src, all_edge_row;  // every message, any relation
};

EncoderPlan plan_encoder(const VideoGraph& vg, const SgemConfig& config,
                         std::size_t num_predicates);

/// Registers sgem.* parameters.
void register_sgem_params(ParamStore<float>& params, const SgemConfig& config,
                          std::size_t num_objects, std::size_t num_predicates, ParamInit& init);

/// Tensor handles resolved from a ParamStore once per step.
template <typename T>
struct SgemWeights {
    struct Head {
        Tensor<T> theta_v;  // [d_in x d_head]
        Tensor<T> theta_e;  // [d_edge x d_head]
        Tensor<T> attn;     // [3 d_head x 1]
    };
    struct Relation {
        Tensor<T> theta_s;  // [d_in x d_out]
        std::vector<Head> heads;
    };
    struct Gine {
        Tensor<T> theta_s;  // [d_in x d_out]
        Tensor<T> theta_v;  // [d_in x d_out]
        Tensor<T> theta_e;  // [d_edge x d_out]
    };
    std::vector<std::vector<Relation>> layers;  // attention encoders
    std::vector<Gine> gine_layers;
    Tensor<T> object_embed;     // [n_objects x d_node]
    Tensor<T> predicate_embed;  // [n_predicates x d_edge]
    Tensor<T> root_embed;       // [1 x d_node]
    Tensor<T> root_link_embed;  // [1 x d_edge]
    Tensor<T> bbox_proj;        // [5 x d_node], only with bbox features
};

template <typename T>
SgemWeights<T> bind_sgem(const ParamStore<T>& params, const SgemConfig& config,
                         std::size_t num_predicates);

template <typename T>
Tensor<T> init_node_features(const EncoderPlan& plan, const SgemWeights<T>& w,
                             const SgemConfig& config);

/// Edge-feature table: predicate embeddings followed by the root-link row.
template <typename T>
Tensor<T> edge_feature_table(const SgemWeights<T>& w);

/// Attention weights of one (layer, relation, head) for every directed
/// message of the relation, in plan order.
template <typename T>
Tensor<T> attention_coefficients(const EncoderPlan::Relation& rel,
                                 const typename SgemWeights<T>::Head& head,
                                 const Tensor<T>& node_feats, const Tensor<T>& edge_table,
                                 const SgemConfig& config);

template <typename T>
Tensor<T> edge_gat_layer(std::size_t layer, const Tensor<T>& node_feats, const EncoderPlan& plan,
                         const SgemWeights<T>& w, const Tensor<T>& edge_table,
                         const SgemConfig& config);

template <typename T>
struct EncodeResult {
    Tensor<T> frame_embeddings;          // [n_frames x d_out]
    Tensor<T> node_embeddings;           // [n_nodes x d_out]
    std::vector<Tensor<T>> layer_inputs;  // input features of every layer
};

template <typename T>
EncodeResult<T> encode_video_graph(const EncoderPlan& plan, const SgemWeights<T>& w,
                                   const SgemConfig& config);

/// Elementwise sum over frames -> [1 x d_out].
template <typename T>
Tensor<T> aggregate_human_roots(const Tensor<T>& frame_embeddings);

}  // namespace ghr
