// SPDX-License-Identifier: Apache-2.0
#include "ghr/sgem.hpp"

#include <algorithm>
#include <set>

#include "ghr/error.hpp"

namespace ghr {

namespace {

std::string layer_prefix(std::size_t l) { return "sgem.layer" + std::to_string(l); }

std::string rel_prefix(std::size_t l, std::size_t r) {
    return layer_prefix(l) + ".rel" + std::to_string(r);
}

std::string head_prefix(std::size_t l, std::size_t r, std::size_t h) {
    return rel_prefix(l, r) + ".head" + std::to_string(h);
}

bool uses_attention(const SgemConfig& c) { return c.encoder != EncoderKind::Gine; }

}  // namespace

std::size_t SgemConfig::num_relations(std::size_t num_predicates) const {
    if (encoder != EncoderKind::HetEdgeGat) return 1;
    if (predicate_family.empty()) return num_predicates + 1;
    return *std::max_element(predicate_family.begin(), predicate_family.end()) + 2;
}

std::size_t SgemConfig::relation_of(const EdgeLabel& label, std::size_t num_predicates) const {
    if (encoder != EncoderKind::HetEdgeGat) return 0;
    if (label.is_root_link()) return root_link_relation(num_predicates);
    return predicate_family.empty() ? label.predicate : predicate_family.at(label.predicate);
}

void SgemConfig::validate(std::size_t num_predicates) const {
    if (d_node == 0 || d_edge == 0 || heads == 0 || d_head == 0 || n_layers == 0) {
        throw Error(ErrorCode::InvalidArgument, "encoder widths, heads and layers must be >= 1");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "leaky slope must lie in (0, 1)");
    }
    if (!predicate_family.empty() && predicate_family.size() != num_predicates) {
        throw Error(ErrorCode::InvalidArgument, "relation families must map every predicate");
    }
}

EncoderPlan plan_encoder(const VideoGraph& vg, const SgemConfig& config,
                         std::size_t num_predicates) {
    EncoderPlan plan;
    plan.num_nodes = vg.num_nodes();
    plan.num_frames = vg.num_frames();
    plan.global_root = vg.global_root();
    for (std::size_t i = 0; i < vg.num_nodes(); ++i) {
        const auto& n = vg.nodes()[i];
        if (n.kind == FlatNodeKind::Entity) {
            plan.entity_nodes.push_back(i);
            plan.entity_classes.push_back(n.class_index);
            const BBox& b = n.bbox;
            plan.entity_geometry.insert(plan.entity_geometry.end(), {b.x, b.y, b.w, b.h, b.area()});
        }
        if (n.kind != FlatNodeKind::GlobalRoot) {
            plan.frame_nodes.push_back(i);
            plan.frame_of_node.push_back(n.frame);
        }
    }
    for (std::size_t f = 0; f < vg.num_frames(); ++f) plan.human_roots.push_back(vg.human_root(f));

    const std::size_t n_rel = config.num_relations(num_predicates);
    std::vector<EncoderPlan::Relation> rels(n_rel);
    std::vector<bool> has_edge(plan.num_nodes, false);
    auto push = [&](EncoderPlan::Relation& r, std::size_t dst, std::size_t src, std::size_t row) {
        r.dst.push_back(dst);
        r.src.push_back(src);
        r.edge_row.push_back(row);
        plan.all_dst.push_back(dst);
        plan.all_src.push_back(src);
        plan.all_edge_row.push_back(row);
    };
    for (const auto& e : vg.edges()) {
        const std::size_t r = config.relation_of(e.label, num_predicates);
        const std::size_t row = e.label.is_root_link() ? num_predicates : e.label.predicate;
        push(rels[r], e.a, e.b, row);
        push(rels[r], e.b, e.a, row);
        has_edge[e.a] = has_edge[e.b] = true;
    }
    for (std::size_t r = 0; r < n_rel; ++r) {
        if (rels[r].dst.empty()) continue;
        rels[r].relation = r;
        std::set<std::size_t> incident(rels[r].dst.begin(), rels[r].dst.end());
        rels[r].incident.assign(incident.begin(), incident.end());
        plan.relations.push_back(std::move(rels[r]));
    }
    for (std::size_t i = 0; i < plan.num_nodes; ++i) {
        if (!has_edge[i]) plan.isolated.push_back(i);
    }
    return plan;
}

void register_sgem_params(ParamStore<float>& params, const SgemConfig& config,
                          std::size_t num_objects, std::size_t num_predicates, ParamInit& init) {
    config.validate(num_predicates);
    const std::size_t d_out = config.d_out();
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        const std::size_t d_in = config.layer_input_width(l);
        if (!uses_attention(config)) {
            params.add(layer_prefix(l) + ".gine.theta_s", init.xavier(d_in, d_out));
            params.add(layer_prefix(l) + ".gine.theta_v", init.xavier(d_in, d_out));
            params.add(layer_prefix(l) + ".gine.theta_e", init.xavier(config.d_edge, d_out));
            continue;
        }
        for (std::size_t r = 0; r < config.num_relations(num_predicates); ++r) {
            params.add(rel_prefix(l, r) + ".theta_s", init.xavier(d_in, d_out));
            for (std::size_t h = 0; h < config.heads; ++h) {
                params.add(head_prefix(l, r, h) + ".theta_v", init.xavier(d_in, config.d_head));
                params.add(head_prefix(l, r, h) + ".theta_e", init.xavier(config.d_edge, config.d_head));
                params.add(head_prefix(l, r, h) + ".attn", init.xavier(3 * config.d_head, 1));
            }
        }
    }
    params.add("sgem.embed.object", init.embedding(num_objects, config.d_node));
    params.add("sgem.embed.predicate", init.embedding(num_predicates, config.d_edge));
    params.add("sgem.embed.root", init.embedding(1, config.d_node));
    params.add("sgem.embed.root_link", init.embedding(1, config.d_edge));
    if (config.use_bbox_features) {
        params.add("sgem.embed.bbox", init.xavier(5, config.d_node));
    }
}

template <typename T>
SgemWeights<T> bind_sgem(const ParamStore<T>& params, const SgemConfig& config,
                         std::size_t num_predicates) {
    SgemWeights<T> w;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        if (!uses_attention(config)) {
            w.gine_layers.push_back({params.get(layer_prefix(l) + ".gine.theta_s"),
                                     params.get(layer_prefix(l) + ".gine.theta_v"),
                                     params.get(layer_prefix(l) + ".gine.theta_e")});
            continue;
        }
        std::vector<typename SgemWeights<T>::Relation> rels;
        for (std::size_t r = 0; r < config.num_relations(num_predicates); ++r) {
            typename SgemWeights<T>::Relation rel;
            rel.theta_s = params.get(rel_prefix(l, r) + ".theta_s");
            for (std::size_t h = 0; h < config.heads; ++h) {
                rel.heads.push_back({params.get(head_prefix(l, r, h) + ".theta_v"),
                                     params.get(head_prefix(l, r, h) + ".theta_e"),
                                     params.get(head_prefix(l, r, h) + ".attn")});
            }
            rels.push_back(std::move(rel));
        }
        w.layers.push_back(std::move(rels));
    }
    w.object_embed = params.get("sgem.embed.object");
    w.predicate_embed = params.get("sgem.embed.predicate");
    w.root_embed = params.get("sgem.embed.root");
    w.root_link_embed = params.get("sgem.embed.root_link");
    if (config.use_bbox_features) w.bbox_proj = params.get("sgem.embed.bbox");
    return w;
}

template <typename T>
Tensor<T> init_node_features(const EncoderPlan& plan, const SgemWeights<T>& w,
                             const SgemConfig& config) {
    Tensor<T> x = segment_sum(w.root_embed, Index{plan.global_root}, plan.num_nodes);
    if (plan.entity_nodes.empty()) return x;
    Tensor<T> ent = embedding_lookup(w.object_embed, plan.entity_classes);
    if (config.use_bbox_features) {
        std::vector<T> geom(plan.entity_geometry.begin(), plan.entity_geometry.end());
        Tensor<T> g({plan.entity_nodes.size(), 5}, std::move(geom));
        ent = add(ent, matmul(g, w.bbox_proj));
    }
    return add(segment_sum(ent, plan.entity_nodes, plan.num_nodes), x);
}

template <typename T>
Tensor<T> edge_feature_table(const SgemWeights<T>& w) {
    return concat(std::vector<Tensor<T>>{w.predicate_embed, w.root_link_embed}, 0);
}

namespace {

// Attention from precomputed projections q = X theta_v and e = E theta_e.
template <typename T>
Tensor<T> attention_from_projections(const EncoderPlan::Relation& rel, const Tensor<T>& attn,
                                     const Tensor<T>& q, const Tensor<T>& e,
                                     const SgemConfig& config) {
    const Tensor<T> joint = concat(
        std::vector<Tensor<T>>{embedding_lookup(q, rel.dst), embedding_lookup(q, rel.src), e}, 1);
    const Tensor<T> scores = leaky_relu(matmul(joint, attn), static_cast<T>(config.leaky_slope));
    return segment_softmax(scores, rel.dst);
}

}  // namespace

template <typename T>
Tensor<T> attention_coefficients(const EncoderPlan::Relation& rel,
                                 const typename SgemWeights<T>::Head& head,
                                 const Tensor<T>& node_feats, const Tensor<T>& edge_table,
                                 const SgemConfig& config) {
    const Tensor<T> q = matmul(node_feats, head.theta_v);
    const Tensor<T> e = matmul(embedding_lookup(edge_table, rel.edge_row), head.theta_e);
    return attention_from_projections(rel, head.attn, q, e, config);
}

namespace {

template <typename T>
Tensor<T> self_term(const Tensor<T>& x, const Index& nodes, const Tensor<T>& theta_s,
                    std::size_t n) {
    return segment_sum(matmul(embedding_lookup(x, nodes), theta_s), nodes, n);
}

template <typename T>
Tensor<T> accumulate(const Tensor<T>& acc, const Tensor<T>& term) {
    return acc.defined() ? add(acc, term) : term;
}

template <typename T>
Tensor<T> gine_layer(std::size_t layer, const Tensor<T>& x, const EncoderPlan& plan,
                     const SgemWeights<T>& w, const Tensor<T>& edge_table) {
    const auto& g = w.gine_layers.at(layer);
    Tensor<T> out = matmul(x, g.theta_s);
    if (plan.all_dst.empty()) return out;
    const Tensor<T> msg = elu(add(embedding_lookup(matmul(x, g.theta_v), plan.all_src),
                                  matmul(embedding_lookup(edge_table, plan.all_edge_row), g.theta_e)));
    return add(out, segment_sum(msg, plan.all_dst, plan.num_nodes));
}

}  // namespace

template <typename T>
Tensor<T> edge_gat_layer(std::size_t layer, const Tensor<T>& node_feats, const EncoderPlan& plan,
                         const SgemWeights<T>& w, const Tensor<T>& edge_table,
                         const SgemConfig& config) {
    const std::size_t d_in = config.layer_input_width(layer);
    if (node_feats.rank() != 2 || node_feats.dim(0) != plan.num_nodes || node_feats.dim(1) != d_in) {
        throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer) + " expects [" +
                                                  std::to_string(plan.num_nodes) + " x " +
                                                  std::to_string(d_in) + "] features, got " +
                                                  shape_string(node_feats.shape()));
    }
    if (config.encoder == EncoderKind::Gine) return gine_layer(layer, node_feats, plan, w, edge_table);

    const auto& rel_weights = w.layers.at(layer);
    const std::size_t n = plan.num_nodes;
    Tensor<T> out;
    for (const auto& rel : plan.relations) {
        const auto& rw = rel_weights.at(rel.relation);
        std::vector<Tensor<T>> heads;
        heads.reserve(rw.heads.size());
        const Tensor<T> edges = embedding_lookup(edge_table, rel.edge_row);
        for (const auto& head : rw.heads) {
            const Tensor<T> q = matmul(node_feats, head.theta_v);
            const Tensor<T> e = matmul(edges, head.theta_e);
            const Tensor<T> alpha = attention_from_projections(rel, head.attn, q, e, config);
            const Tensor<T> value = add(embedding_lookup(q, rel.src), e);
            heads.push_back(segment_sum(scale_rows(value, alpha), rel.dst, n));
        }
        const Tensor<T> messages = heads.size() == 1 ? heads.front() : concat(heads, 1);
        out = accumulate(out, add(self_term(node_feats, rel.incident, rw.theta_s, n), messages));
    }
    if (!plan.isolated.empty()) {
        // The root-link relation is last; homogeneous encoders have only one.
        const auto& fallback = rel_weights.back();
        out = accumulate(out, self_term(node_feats, plan.isolated, fallback.theta_s, n));
    }
    return out;
}

template <typename T>
EncodeResult<T> encode_video_graph(const EncoderPlan& plan, const SgemWeights<T>& w,
                                   const SgemConfig& config) {
    EncodeResult<T> result;
    const Tensor<T> edge_table = edge_feature_table(w);
    Tensor<T> x = init_node_features(plan, w, config);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        result.layer_inputs.push_back(x);
        x = edge_gat_layer(l, x, plan, w, edge_table, config);
        if (l + 1 < config.n_layers) x = elu(x);
    }
    result.node_embeddings = x;
    if (config.readout == FrameReadout::HumanRoot) {
        result.frame_embeddings = embedding_lookup(x, plan.human_roots);
    } else {
        result.frame_embeddings =
            segment_sum(embedding_lookup(x, plan.frame_nodes), plan.frame_of_node, plan.num_frames);
    }
    return result;
}

template <typename T>
Tensor<T> aggregate_human_roots(const Tensor<T>& frame_embeddings) {
    if (frame_embeddings.rank() != 2) {
        throw Error(ErrorCode::ShapeMismatch, "frame embeddings must be [n_frames x d]");
    }
    return sum(frame_embeddings, 0);
}

#define GHR_INSTANTIATE(T)                                                                      \
    template SgemWeights<T> bind_sgem(const ParamStore<T>&, const SgemConfig&, std::size_t);    \
    template Tensor<T> init_node_features(const EncoderPlan&, const SgemWeights<T>&,            \
                                          const SgemConfig&);                                   \
    template Tensor<T> edge_feature_table(const SgemWeights<T>&);                               \
    template Tensor<T> attention_coefficients<T>(const EncoderPlan::Relation&,                  \
                                                 const typename SgemWeights<T>::Head&,          \
                                                 const Tensor<T>&, const Tensor<T>&,            \
                                                 const SgemConfig&);                            \
    template Tensor<T> edge_gat_layer(std::size_t, const Tensor<T>&, const EncoderPlan&,        \
                                      const SgemWeights<T>&, const Tensor<T>&,                  \
                                      const SgemConfig&);                                       \
    template EncodeResult<T> encode_video_graph(const EncoderPlan&, const SgemWeights<T>&,      \
                                                const SgemConfig&);                             \
    template Tensor<T> aggregate_human_roots(const Tensor<T>&);

GHR_INSTANTIATE(float)
GHR_INSTANTIATE(double)
#undef GHR_INSTANTIATE

}  // namespace ghr
