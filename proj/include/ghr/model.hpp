// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "ghr/crn.hpp"
#include "ghr/params.hpp"
#include "ghr/scene_graph.hpp"
#include "ghr/sgem.hpp"
#include "ghr/video_graph.hpp"

namespace ghr {

struct ModelConfig {
    SgemConfig sgem;
    CrnConfig crn;
    HeadKind head = HeadKind::Crn;
    std::size_t d_q = 768;
    std::size_t head_hidden = 64;
    std::size_t num_answers = 2;
    NoHumanPolicy no_human = NoHumanPolicy::Skip;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
/// Missing keys keep the values already in `base`.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

std::string to_string(EncoderKind k);
std::string to_string(HeadKind k);
EncoderKind parse_encoder_kind(const std::string& s);
HeadKind parse_head_kind(const std::string& s);

/// Fresh parameters: sgem.*, then crn.* (CRN head only), then head.*.
ParamStore<float> init_model_params(const ModelConfig& config, const Vocabulary& vocab,
                                    std::uint64_t seed);

/// Everything about one video that the forward pass needs besides weights.
struct PreparedVideo {
    EncoderPlan plan;
    ClipPlan clips;
};

PreparedVideo prepare_video(const VideoGraph& vg, const ModelConfig& config,
                            const Vocabulary& vocab);

template <typename T>
struct ModelWeights {
    SgemWeights<T> sgem;
    CrnWeights<T> crn;
    HeadWeights<T> head;
};

template <typename T>
ModelWeights<T> bind_model(const ParamStore<T>& params, const ModelConfig& config,
                           std::size_t num_predicates);

/// Answer logits [1 x K]. `sampling_seed` keys CRN subset sampling.
template <typename T>
Tensor<T> model_logits(const ModelWeights<T>& w, const ModelConfig& config,
                       const PreparedVideo& video, const Tensor<T>& question,
                       std::uint64_t sampling_seed);

}  // namespace ghr
