// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ghr/dataset.hpp"
#include "ghr/model.hpp"

namespace ghr {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 8;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;
    std::size_t threads = 1;
    /// Stop once an epoch's train accuracy reaches this value; 0 disables.
    double stop_at_train_acc = 0.0;

    void validate() const;
};

json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});

/// One (video, question, answer) triple ready for the forward pass.
struct Example {
    std::string qa_id;
    const PreparedVideo* video = nullptr;
    const VideoGraph* graph = nullptr;
    std::string question_text;
    Tensor<float> question;
    std::size_t answer = 0;
    std::size_t category = 0;
};

struct PreparedData {
    std::size_t num_predicates = 0;
    std::map<std::string, PreparedVideo> videos;
    std::vector<Example> train;
    std::vector<Example> eval;
};

/// Checks answer-list and embedding dimensions against `config`
/// (DimensionMismatch) and prepares each referenced video once. The result
/// points into `dataset`, which must outlive it.
PreparedData prepare_data(const Dataset& dataset, const ModelConfig& config);

class Adam {
public:
    Adam(ParamStore<float>& params, const TrainConfig& config);
    /// `grads` is parallel to the store's tensors.
    void step(const std::vector<std::vector<float>>& grads);
    std::size_t steps() const { return t_; }

private:
    ParamStore<float>& params_;
    TrainConfig config_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    std::size_t t_ = 0;
};

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_global_norm(std::vector<std::vector<float>>& grads, double max_norm);

struct EvalReport {
    std::size_t total = 0;
    std::size_t correct = 0;
    double overall = 0.0;
    /// Mean cross-entropy; only model evaluations fill it.
    std::optional<double> mean_loss;
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::size_t> correct_by_category;
    std::map<std::string, double> per_category;
    std::string fingerprint;
    double wall_seconds = 0.0;

    json to_json() const;
};

using Predictor = std::function<std::size_t(const Example&)>;

EvalReport evaluate(const std::vector<Example>& examples, const Predictor& predict,
                    std::size_t threads = 1);
/// Argmax of the model logits, with the evaluation sampling seed.
EvalReport evaluate_model(const std::vector<Example>& examples, const ModelWeights<float>& weights,
                          const ModelConfig& config, std::size_t threads = 1);

/// Short hex digest of the canonical JSON dump.
std::string config_fingerprint(const json& config);

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> eval_acc;
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::optional<std::size_t> best_epoch;
    std::size_t steps = 0;
};

/// Writes loss_log.csv, final.ghrc and best.ghrc (best eval accuracy) under
/// `out_dir` when given; each checkpoint gets a .json sidecar holding both
/// configs. Throws NonFiniteLoss naming the first non-finite tensor.
TrainResult train(ParamStore<float>& params, const ModelConfig& model, const PreparedData& data,
                  const TrainConfig& config,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Sidecar written next to a checkpoint.
json checkpoint_sidecar(const ModelConfig& model, const TrainConfig& train, std::size_t epoch);
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace ghr
