// SPDX-License-Identifier: Apache-2.0
#include "ghr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "ghr/binary_io.hpp"
#include "ghr/error.hpp"

namespace ghr {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad("learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) bad("epsilon must be > 0");
    if (batch_size == 0) bad("batch size must be >= 1");
    if (epochs == 0) bad("epochs must be >= 1");
    if (!(clip_norm > 0.0)) bad("clip norm must be > 0");
    if (threads == 0) bad("threads must be >= 1");
    if (!(stop_at_train_acc >= 0.0 && stop_at_train_acc <= 1.0)) bad("stop accuracy must lie in [0, 1]");
}

json train_config_to_json(const TrainConfig& c) {
    return {{"optimizer", "adam"},
            {"lr", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.epsilon},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"clip_norm", c.clip_norm},
            {"threads", c.threads},
            {"stop_at_train_acc", c.stop_at_train_acc}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    try {
        if (j.contains("lr")) c.learning_rate = j["lr"].get<double>();
        if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
        if (j.contains("beta2")) c.beta2 = j["beta2"].get<double>();
        if (j.contains("eps")) c.epsilon = j["eps"].get<double>();
        if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("clip_norm")) c.clip_norm = j["clip_norm"].get<double>();
        if (j.contains("threads")) c.threads = j["threads"].get<std::size_t>();
        if (j.contains("stop_at_train_acc")) c.stop_at_train_acc = j["stop_at_train_acc"].get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("train config: ") + e.what());
    }
    return c;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto splitmix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

PreparedData prepare_data(const Dataset& dataset, const ModelConfig& config) {
    if (dataset.answers.size() != config.num_answers) {
        throw Error(ErrorCode::DimensionMismatch,
                    "dataset has " + std::to_string(dataset.answers.size()) +
                        " answers but the model expects " + std::to_string(config.num_answers));
    }
    PreparedData out;
    out.num_predicates = dataset.vocab.num_predicates();
    auto convert = [&](const std::vector<QaSample>& samples, std::vector<Example>& dst) {
        for (const auto& s : samples) {
            const auto& q = dataset.questions.at(s.qa_id);
            if (q.vector.numel() != config.d_q) {
                throw Error(ErrorCode::DimensionMismatch,
                            "question \"" + s.qa_id + "\" has dimension " +
                                std::to_string(q.vector.numel()) + ", model expects " +
                                std::to_string(config.d_q));
            }
            auto it = out.videos.find(s.video_id);
            if (it == out.videos.end()) {
                it = out.videos.emplace(s.video_id, prepare_video(dataset.video(s.video_id), config, dataset.vocab))
                         .first;
            }
            Example ex;
            ex.qa_id = s.qa_id;
            ex.video = &it->second;
            ex.graph = &dataset.video(s.video_id);
            ex.question_text = s.question;
            ex.question = q.vector;
            ex.answer = s.answer_index;
            ex.category = s.category;
            dst.push_back(std::move(ex));
        }
    };
    convert(dataset.train, out.train);
    convert(dataset.eval, out.eval);
    return out;
}

Adam::Adam(ParamStore<float>& params, const TrainConfig& config) : params_(params), config_(config) {
    for (const auto& t : params.tensors()) {
        m_.emplace_back(t.numel(), 0.0f);
        v_.emplace_back(t.numel(), 0.0f);
    }
}

void Adam::step(const std::vector<std::vector<float>>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(config_.beta1);
    const float b2 = static_cast<float>(config_.beta2);
    for (std::size_t p = 0; p < grads.size(); ++p) {
        auto w = params_.tensors()[p].mutable_data();
        auto& m = m_[p];
        auto& v = v_[p];
        const auto& g = grads[p];
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            w[i] -= static_cast<float>(config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon));
        }
    }
}

double clip_global_norm(std::vector<std::vector<float>>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads) {
        for (float x : g) sq += static_cast<double>(x) * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const float s = static_cast<float>(max_norm / norm);
        for (auto& g : grads) {
            for (float& x : g) x *= s;
        }
    }
    return norm;
}

std::string config_fingerprint(const json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json EvalReport::to_json() const {
    json cats = json::object();
    for (const auto& [name, n] : counts) {
        cats[name] = {{"count", n},
                      {"correct", correct_by_category.at(name)},
                      {"accuracy", per_category.at(name)}};
    }
    json j = {{"total", total},
              {"correct", correct},
              {"overall", overall},
              {"per_category", cats},
              {"fingerprint", fingerprint},
              {"wall_seconds", wall_seconds}};
    j["mean_loss"] = mean_loss ? json(*mean_loss) : json(nullptr);
    return j;
}

namespace {

EvalReport tally(const std::vector<Example>& examples, const std::vector<std::size_t>& predictions) {
    EvalReport r;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const std::string cat(kCategories.at(examples[i].category));
        ++r.counts[cat];
        auto& c = r.correct_by_category[cat];
        if (predictions[i] == examples[i].answer) {
            ++c;
            ++r.correct;
        }
    }
    r.total = examples.size();
    r.overall = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    for (const auto& [name, n] : r.counts) {
        r.per_category[name] = static_cast<double>(r.correct_by_category[name]) / static_cast<double>(n);
    }
    return r;
}

std::size_t argmax(std::span<const float> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

EvalReport evaluate(const std::vector<Example>& examples, const Predictor& predict, std::size_t threads) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> predictions(examples.size());
    parallel_for(examples.size(), threads, [&](std::size_t i) { predictions[i] = predict(examples[i]); });
    EvalReport r = tally(examples, predictions);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

EvalReport evaluate_model(const std::vector<Example>& examples, const ModelWeights<float>& weights,
                          const ModelConfig& config, std::size_t threads) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> predictions(examples.size());
    std::vector<double> losses(examples.size());
    parallel_for(examples.size(), threads, [&](std::size_t i) {
        TapeScope<float> no_grad(nullptr);
        const auto& ex = examples[i];
        const Tensor<float> logits = model_logits(weights, config, *ex.video, ex.question, 0);
        if (logits.numel() != config.num_answers) {
            throw Error(ErrorCode::ShapeMismatch, "logit width differs from the answer count");
        }
        predictions[i] = argmax(logits.data());
        losses[i] = softmax_cross_entropy(logits, {ex.answer}).item();
    });
    EvalReport r = tally(examples, predictions);
    if (!examples.empty()) {
        r.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    }
    r.fingerprint = config_fingerprint(model_config_to_json(config));
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

json checkpoint_sidecar(const ModelConfig& model, const TrainConfig& train, std::size_t epoch) {
    return {{"model", model_config_to_json(model)}, {"train", train_config_to_json(train)}, {"epoch", epoch}};
}

fs::path sidecar_path(const fs::path& checkpoint) {
    fs::path p = checkpoint;
    p += ".json";
    return p;
}

namespace {

void write_text(const fs::path& p, const std::string& text) {
    io::write_file_atomic(p, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_checkpoint(const fs::path& path, const ParamStore<float>& params, const ModelConfig& model,
                      const TrainConfig& config, std::size_t epoch) {
    save_checkpoint(path, params);
    write_text(sidecar_path(path), checkpoint_sidecar(model, config, epoch).dump(2) + "\n");
}

std::string format_row(const EpochLog& e) {
    char buf[160];
    if (e.eval_acc) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.6f,%.6f\n", e.epoch, e.loss, e.train_acc, *e.eval_acc);
    } else {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.6f,\n", e.epoch, e.loss, e.train_acc);
    }
    return buf;
}

/// Name of the first parameter holding a non-finite value, if any.
std::optional<std::string> first_non_finite(const ParamStore<float>& params) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!check_finite(params.tensors()[p]).ok) return params.names()[p];
    }
    return std::nullopt;
}

}  // namespace

TrainResult train(ParamStore<float>& params, const ModelConfig& model, const PreparedData& data,
                  const TrainConfig& config, const std::optional<fs::path>& out_dir,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (data.train.empty()) throw Error(ErrorCode::EmptyInput, "no training samples");
    if (out_dir) fs::create_directories(*out_dir);

    const ModelWeights<float> weights =
        bind_model(params, model, data.num_predicates);
    Adam adam(params, config);
    const std::size_t n_params = params.size();

    TrainResult result;
    std::optional<double> best_eval;
    std::string csv = "epoch,loss,train_acc,eval_acc\n";
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(config.seed, epoch, 0x5eed));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            std::vector<std::vector<std::vector<float>>> sample_grads(count);
            std::vector<double> losses(count);
            std::vector<std::size_t> predictions(count);

            parallel_for(count, config.threads, [&](std::size_t b) {
                const std::size_t idx = order[start + b];
                const Example& ex = data.train[idx];
                GradTape<float> tape;
                TapeScope<float> scope(&tape);
                const Tensor<float> logits =
                    model_logits(weights, model, *ex.video, ex.question, mix_seed(config.seed, epoch, idx));
                const Tensor<float> loss = softmax_cross_entropy(logits, {ex.answer});
                losses[b] = loss.item();
                predictions[b] = argmax(logits.data());
                if (!std::isfinite(losses[b])) return;
                tape.backward(loss);
                auto& grads = sample_grads[b];
                grads.resize(n_params);
                for (std::size_t p = 0; p < n_params; ++p) {
                    const auto* g = tape.grad(params.tensors()[p]);
                    grads[p] = g ? *g : std::vector<float>(params.tensors()[p].numel(), 0.0f);
                }
            });

            std::vector<std::vector<float>> total(n_params);
            for (std::size_t p = 0; p < n_params; ++p) total[p].assign(params.tensors()[p].numel(), 0.0f);
            for (std::size_t b = 0; b < count; ++b) {
                const Example& ex = data.train[order[start + b]];
                if (!std::isfinite(losses[b])) {
                    const auto bad = first_non_finite(params);
                    throw Error(ErrorCode::NonFiniteLoss,
                                "epoch " + std::to_string(epoch) + ", sample \"" + ex.qa_id +
                                    "\": loss is non-finite; offending tensor: " +
                                    (bad ? *bad : std::string("logits")));
                }
                loss_sum += losses[b];
                if (predictions[b] == ex.answer) ++correct;
                for (std::size_t p = 0; p < n_params; ++p) {
                    const auto& g = sample_grads[b][p];
                    auto& t = total[p];
                    for (std::size_t i = 0; i < g.size(); ++i) t[i] += g[i];
                }
            }
            const float inv = 1.0f / static_cast<float>(count);
            for (std::size_t p = 0; p < n_params; ++p) {
                for (float& x : total[p]) x *= inv;
                for (float x : total[p]) {
                    if (!std::isfinite(x)) {
                        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) +
                                                                  ": gradient of \"" + params.names()[p] +
                                                                  "\" is non-finite");
                    }
                }
            }
            clip_global_norm(total, config.clip_norm);
            adam.step(total);
            if (const auto bad = first_non_finite(params)) {
                throw Error(ErrorCode::NonFiniteLoss,
                            "epoch " + std::to_string(epoch) + ": parameter \"" + *bad + "\" became non-finite");
            }
        }

        EpochLog row;
        row.epoch = epoch;
        row.loss = loss_sum / static_cast<double>(order.size());
        row.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        if (!data.eval.empty()) {
            row.eval_acc = evaluate_model(data.eval, weights, model, config.threads).overall;
        }
        result.log.push_back(row);
        csv += format_row(row);
        if (out_dir) {
            write_text(*out_dir / "loss_log.csv", csv);
            if (row.eval_acc && (!best_eval || *row.eval_acc > *best_eval)) {
                write_checkpoint(*out_dir / "best.ghrc", params, model, config, epoch);
            }
        }
        if (row.eval_acc && (!best_eval || *row.eval_acc > *best_eval)) {
            best_eval = row.eval_acc;
            result.best_epoch = epoch;
        }
        if (on_epoch) on_epoch(row);
        if (config.stop_at_train_acc > 0.0 && row.train_acc >= config.stop_at_train_acc) break;
    }
    result.steps = adam.steps();
    if (out_dir) {
        write_checkpoint(*out_dir / "final.ghrc", params, model, config, result.log.back().epoch);
    }
    return result;
}

}  // namespace ghr
