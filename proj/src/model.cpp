// SPDX-License-Identifier: Apache-2.0
#include "ghr/model.hpp"

#include "ghr/error.hpp"

namespace ghr {

std::string to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::HetEdgeGat: return "hetedgegat";
        case EncoderKind::EdgeGat: return "edgegat";
        case EncoderKind::Gine: return "gine";
    }
    return "?";
}

std::string to_string(HeadKind k) { return k == HeadKind::Crn ? "crn" : "mlp"; }

EncoderKind parse_encoder_kind(const std::string& s) {
    if (s == "hetedgegat") return EncoderKind::HetEdgeGat;
    if (s == "edgegat") return EncoderKind::EdgeGat;
    if (s == "gine") return EncoderKind::Gine;
    throw Error(ErrorCode::InvalidArgument, "unknown encoder \"" + s + "\"");
}

HeadKind parse_head_kind(const std::string& s) {
    if (s == "crn") return HeadKind::Crn;
    if (s == "mlp") return HeadKind::Mlp;
    throw Error(ErrorCode::InvalidArgument, "unknown head \"" + s + "\"");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["encoder"] = to_string(c.sgem.encoder);
    j["head"] = to_string(c.head);
    j["d_node"] = c.sgem.d_node;
    j["d_edge"] = c.sgem.d_edge;
    j["heads"] = c.sgem.heads;
    j["d_head"] = c.sgem.d_head;
    j["layers"] = c.sgem.n_layers;
    j["leaky_slope"] = c.sgem.leaky_slope;
    j["relation_families"] = c.sgem.predicate_family;
    j["bbox_features"] = c.sgem.use_bbox_features;
    j["frame_readout"] = c.sgem.readout == FrameReadout::HumanRoot ? "human_root" : "frame_sum";
    j["d"] = c.crn.d;
    j["orders"] = c.crn.orders;
    j["k_max"] = c.crn.k_max;
    j["subsets"] = c.crn.subsets;
    j["clip_length"] = c.crn.clip_length;
    j["g_depth"] = c.crn.g_depth;
    j["p_depth"] = c.crn.p_depth;
    j["d_q"] = c.d_q;
    j["head_hidden"] = c.head_hidden;
    j["answers"] = c.num_answers;
    j["no_human"] = c.no_human == NoHumanPolicy::Skip ? "skip" : "synthetic";
    return j;
}

namespace {

template <typename V>
void read_if(const nlohmann::json& j, const char* key, V& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("config key \"") + key + "\": " + e.what());
    }
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedDocument, "model config must be an object");
    std::string s;
    if (j.contains("encoder")) {
        read_if(j, "encoder", s);
        c.sgem.encoder = parse_encoder_kind(s);
    }
    if (j.contains("head")) {
        read_if(j, "head", s);
        c.head = parse_head_kind(s);
    }
    read_if(j, "d_node", c.sgem.d_node);
    read_if(j, "d_edge", c.sgem.d_edge);
    read_if(j, "heads", c.sgem.heads);
    read_if(j, "d_head", c.sgem.d_head);
    read_if(j, "layers", c.sgem.n_layers);
    read_if(j, "leaky_slope", c.sgem.leaky_slope);
    read_if(j, "relation_families", c.sgem.predicate_family);
    read_if(j, "bbox_features", c.sgem.use_bbox_features);
    if (j.contains("frame_readout")) {
        read_if(j, "frame_readout", s);
        if (s == "human_root") {
            c.sgem.readout = FrameReadout::HumanRoot;
        } else if (s == "frame_sum") {
            c.sgem.readout = FrameReadout::FrameSum;
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown frame_readout \"" + s + "\"");
        }
    }
    read_if(j, "d", c.crn.d);
    read_if(j, "orders", c.crn.orders);
    read_if(j, "k_max", c.crn.k_max);
    read_if(j, "subsets", c.crn.subsets);
    read_if(j, "clip_length", c.crn.clip_length);
    read_if(j, "g_depth", c.crn.g_depth);
    read_if(j, "p_depth", c.crn.p_depth);
    read_if(j, "d_q", c.d_q);
    read_if(j, "head_hidden", c.head_hidden);
    read_if(j, "answers", c.num_answers);
    if (j.contains("no_human")) {
        read_if(j, "no_human", s);
        if (s == "skip") {
            c.no_human = NoHumanPolicy::Skip;
        } else if (s == "synthetic") {
            c.no_human = NoHumanPolicy::SyntheticRoot;
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown no_human policy \"" + s + "\"");
        }
    }
    return c;
}

ParamStore<float> init_model_params(const ModelConfig& config, const Vocabulary& vocab,
                                    std::uint64_t seed) {
    if (config.d_q == 0 || config.head_hidden == 0) {
        throw Error(ErrorCode::InvalidArgument, "d_q and head_hidden must be >= 1");
    }
    ParamStore<float> params;
    ParamInit init(seed);
    register_sgem_params(params, config.sgem, vocab.num_objects(), vocab.num_predicates(), init);
    if (config.head == HeadKind::Crn) {
        register_crn_params(params, config.crn, config.sgem.d_out(), config.d_q, init);
    }
    register_head_params(params, config.head, config.crn.d, config.sgem.d_out(), config.d_q,
                         config.head_hidden, config.num_answers, init);
    return params;
}

PreparedVideo prepare_video(const VideoGraph& vg, const ModelConfig& config,
                            const Vocabulary& vocab) {
    return PreparedVideo{plan_encoder(vg, config.sgem, vocab.num_predicates()),
                         plan_clips(vg, config.crn.clip_length)};
}

template <typename T>
ModelWeights<T> bind_model(const ParamStore<T>& params, const ModelConfig& config,
                           std::size_t num_predicates) {
    ModelWeights<T> w;
    w.sgem = bind_sgem(params, config.sgem, num_predicates);
    if (config.head == HeadKind::Crn) w.crn = bind_crn(params, config.crn);
    w.head = bind_head(params, config.head);
    return w;
}

template <typename T>
Tensor<T> model_logits(const ModelWeights<T>& w, const ModelConfig& config,
                       const PreparedVideo& video, const Tensor<T>& question,
                       std::uint64_t sampling_seed) {
    if (question.numel() != config.d_q) {
        throw Error(ErrorCode::ShapeMismatch, "question embedding has " +
                                                  std::to_string(question.numel()) +
                                                  " values, model expects " +
                                                  std::to_string(config.d_q));
    }
    const auto encoded = encode_video_graph(video.plan, w.sgem, config.sgem);
    if (config.head == HeadKind::Mlp) {
        return mlp_baseline_head(aggregate_human_roots(encoded.frame_embeddings), question, w.head);
    }
    const auto h = hierarchy_forward(encoded.frame_embeddings, video.clips, question, w.crn,
                                     config.crn, sampling_seed);
    return decode_answer(h.video, h.condition, w.head);
}

template ModelWeights<float> bind_model(const ParamStore<float>&, const ModelConfig&, std::size_t);
template ModelWeights<double> bind_model(const ParamStore<double>&, const ModelConfig&, std::size_t);
template Tensor<float> model_logits(const ModelWeights<float>&, const ModelConfig&,
                                    const PreparedVideo&, const Tensor<float>&, std::uint64_t);
template Tensor<double> model_logits(const ModelWeights<double>&, const ModelConfig&,
                                     const PreparedVideo&, const Tensor<double>&, std::uint64_t);

}  // namespace ghr
