// SPDX-License-Identifier: Apache-2.0
// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "ghr/synthetic.hpp"
#include "ghr/toy.hpp"
#include "ghr/train.hpp"
#include "support.hpp"

using namespace ghr;
using namespace ghr::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::ostringstream out, err;
    const int code = ghr::cli::run(args, out, err);
    if (out_text) *out_text = out.str();
    if (code != 0) std::cerr << err.str();
    return code;
}

struct Oracle {
    Vocabulary vocab;
    std::vector<VideoGraph> graphs;
    SgemConfig config;
    std::vector<ParamStore<float>> params;
};

// 20 random graphs: <= 3 frames, <= 6 nodes per frame, 2 predicates plus the
// root link, 2 heads.
Oracle oracle_suite() {
    Oracle s;
    s.vocab = make_vocab(6, 2);
    s.config.heads = 2;
    std::mt19937_64 rng(2024);
    RandomFrameOptions opt;
    opt.max_frames = 3;
    opt.max_nodes = 6;
    for (int i = 0; i < 20; ++i) {
        s.graphs.push_back(random_video(rng, s.vocab, opt, "g" + std::to_string(i)));
        ParamStore<float> p;
        ParamInit init(100 + i);
        register_sgem_params(p, s.config, s.vocab.num_objects(), s.vocab.num_predicates(), init);
        s.params.push_back(std::move(p));
    }
    return s;
}

std::vector<std::string> overfit_gen(const fs::path& out, bool cross) {
    std::vector<std::string> a{"gen-synthetic", "--seed", "7", "--videos", "50", "--frames", "8",
                               "--objects", "10", "--predicates", "5", "--answers", "8", "--out", out.string()};
    if (cross) a.push_back("--cross-frame");
    return a;
}

struct CsvLog {
    std::size_t epochs = 0;
    double best_train_acc = 0.0;
    std::size_t first_epoch_at_95 = 0;
};

CsvLog read_loss_log(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CsvLog log;
    while (std::getline(in, line)) {
        std::size_t epoch;
        double loss, acc;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &epoch, &loss, &acc) != 3) continue;
        log.epochs = epoch;
        log.best_train_acc = std::max(log.best_train_acc, acc);
        if (acc >= 0.95 && log.first_epoch_at_95 == 0) log.first_epoch_at_95 = epoch;
    }
    return log;
}

bool bit_equal(const ParamStore<float>& a, const ParamStore<float>& b) {
    if (a.names() != b.names()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.tensors()[i].shape() != b.tensors()[i].shape()) return false;
        if (std::memcmp(a.tensors()[i].data().data(), b.tensors()[i].data().data(),
                        a.tensors()[i].numel() * sizeof(float)) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace

int main() {
    TempDir work("acceptance");
    const fs::path overfit_dir = work / "synthetic";
    const fs::path cross_dir = work / "cross";

    report("gradient correctness", [] {
        double worst = 0.0, slowest = 0.0;
        std::size_t elements = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto t0 = Clock::now();
            const ToyGradCheck g = toy_grad_check(seed);
            slowest = std::max(slowest, seconds_since(t0));
            worst = std::max(worst, g.report.max_rel_error);
            elements = g.report.elements_checked;
        }
        return Outcome{worst < 1e-3 && slowest < 60.0,
                       "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(elements) +
                           " parameters x 5 seeds, slowest " + fmt("%.2f", slowest) + " s"};
    });

    report("oracle equivalence", [] {
        const auto t0 = Clock::now();
        const Oracle s = oracle_suite();
        double worst = 0.0;
        for (std::size_t i = 0; i < s.graphs.size(); ++i) {
            const auto plan = plan_encoder(s.graphs[i], s.config, s.vocab.num_predicates());
            const auto enc = encode_video_graph(plan, bind_sgem(s.params[i], s.config, s.vocab.num_predicates()), s.config);
            const auto ref = dense_encode(s.graphs[i], s.vocab, s.params[i], s.config);
            worst = std::max(worst, max_abs_diff(to_mat(enc.node_embeddings), ref.nodes));
            worst = std::max(worst, max_abs_diff(to_mat(enc.frame_embeddings), ref.frames));
        }
        const double t = seconds_since(t0);
        return Outcome{worst < 1e-6 && t < 10.0,
                       "max abs error " + fmt("%.2e", worst) + " on 20 graphs in " + fmt("%.2f", t) + " s"};
    });

    report("attention normalization", [] {
        const Oracle s = oracle_suite();
        double worst_sum = 0.0, worst_single = 0.0;
        std::size_t groups = 0, singles = 0;
        for (std::size_t i = 0; i < s.graphs.size(); ++i) {
            const auto plan = plan_encoder(s.graphs[i], s.config, s.vocab.num_predicates());
            const auto w = bind_sgem(s.params[i], s.config, s.vocab.num_predicates());
            const auto enc = encode_video_graph(plan, w, s.config);
            const auto table = edge_feature_table(w);
            for (std::size_t l = 0; l < s.config.n_layers; ++l) {
                for (const auto& rel : plan.relations) {
                    for (std::size_t h = 0; h < s.config.heads; ++h) {
                        const auto a = attention_coefficients<float>(rel, w.layers[l][rel.relation].heads[h],
                                                                     enc.layer_inputs[l], table, s.config);
                        std::map<std::size_t, std::pair<double, std::size_t>> by_dst;
                        for (std::size_t m = 0; m < rel.dst.size(); ++m) {
                            by_dst[rel.dst[m]].first += a.at(m);
                            by_dst[rel.dst[m]].second += 1;
                        }
                        for (const auto& [dst, sc] : by_dst) {
                            ++groups;
                            worst_sum = std::max(worst_sum, std::abs(sc.first - 1.0));
                            if (sc.second == 1) {
                                ++singles;
                                worst_single = std::max(worst_single, std::abs(sc.first - 1.0));
                            }
                        }
                    }
                }
            }
        }
        return Outcome{worst_sum <= 1e-6 && worst_single <= 1e-7 && groups > 0 && singles > 0,
                       std::to_string(groups) + " groups, max |sum-1| " + fmt("%.2e", worst_sum) + "; " +
                           std::to_string(singles) + " single-neighbor groups, max |a-1| " +
                           fmt("%.2e", worst_single)};
    });

    report("graph invariants", [] {
        std::mt19937_64 rng(99);
        const Vocabulary v = make_vocab(8, 4);
        RandomFrameOptions opt;
        opt.max_frames = 6;
        opt.max_nodes = 6;
        opt.humanless_prob = 0.2;
        std::size_t violations = 0, pairs = 0;
        for (int i = 0; i < 200; ++i) {
            const auto frames = random_frames(rng, v, opt);
            const auto policy = i % 2 ? NoHumanPolicy::Skip : NoHumanPolicy::SyntheticRoot;
            const VideoGraph vg = build_video_graph("v", frames, v, policy);
            std::size_t nodes = 1, edges = 0;
            for (std::size_t f = 0; f < vg.num_frames(); ++f) {
                nodes += vg.frame_size(f);
                edges += vg.frames()[f].edges.size() + 1;
            }
            std::size_t synthetic = 0;
            for (const auto& r : vg.human_roots()) synthetic += r.node_id ? 0 : 1;
            std::size_t entity_nodes = 1 + synthetic;
            for (const auto& f : vg.frames()) entity_nodes += f.nodes.size();
            violations += vg.num_nodes() != nodes || vg.num_nodes() != entity_nodes;
            violations += vg.num_edges() != edges;
            for (std::size_t a = 0; a < vg.num_frames(); ++a) {
                for (std::size_t b = a + 1; b < vg.num_frames(); ++b) {
                    ++pairs;
                    violations += bfs_distance(vg, vg.human_root(a), vg.human_root(b)) != 2u;
                    for (std::size_t x = 0; x < vg.frame_size(a); ++x) {
                        violations += bfs_distance(vg, vg.frame_offset(a) + x, vg.human_root(b), vg.global_root())
                                          .has_value();
                    }
                }
            }
        }
        return Outcome{violations == 0, std::to_string(violations) + " violations over 200 videos, " +
                                            std::to_string(pairs) + " frame pairs"};
    });

    report("permutation invariance", [] {
        std::mt19937_64 rng(5);
        const Vocabulary v = make_vocab(6, 3);
        const SgemConfig sc;
        double worst_graph = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const auto frames = random_frames(rng, v, {});
            ParamStore<float> p;
            ParamInit init(trial);
            register_sgem_params(p, sc, v.num_objects(), v.num_predicates(), init);
            const auto w = bind_sgem(p, sc, v.num_predicates());
            const VideoGraph a = build_video_graph("v", frames, v);
            const VideoGraph b = build_video_graph("v", permute_ids(rng, frames), v);
            const auto ea = encode_video_graph(plan_encoder(a, sc, v.num_predicates()), w, sc);
            const auto eb = encode_video_graph(plan_encoder(b, sc, v.num_predicates()), w, sc);
            worst_graph = std::max(worst_graph, max_abs_diff(to_mat(ea.frame_embeddings), to_mat(eb.frame_embeddings)));
        }
        double worst_crn = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            CrnConfig cc;
            cc.subsets = 1000;
            ParamStore<float> p;
            ParamInit init(trial);
            register_crn_params(p, cc, 64, 64, init);
            const auto w = bind_crn(p, cc);
            const std::size_t n = 1 + trial % 6;
            std::normal_distribution<float> g(0.0f, 1.0f);
            std::vector<float> x(n * cc.d), c(cc.d);
            for (float& e : x) e = g(rng);
            for (float& e : c) e = g(rng);
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<float> px(n * cc.d);
            for (std::size_t i = 0; i < n; ++i) std::copy_n(x.begin() + perm[i] * cc.d, cc.d, px.begin() + i * cc.d);
            const Tensor<float> cond({1, cc.d}, c);
            const auto oa = crn_unit(Tensor<float>({n, cc.d}, x), cond, w.clip, cc, 0, 0);
            const auto ob = crn_unit(Tensor<float>({n, cc.d}, px), cond, w.clip, cc, 0, 0);
            for (std::size_t k = 0; k < oa.size(); ++k) {
                worst_crn = std::max(worst_crn, max_abs_diff(to_mat(oa[k]), to_mat(ob[k])));
            }
        }
        return Outcome{worst_graph < 1e-6 && worst_crn < 1e-6,
                       "node ids " + fmt("%.2e", worst_graph) + ", relation unit " + fmt("%.2e", worst_crn) +
                           " (50 trials each)"};
    });

    // Generated once; used by the remaining criteria.
    const int gen_code = run_cli(overfit_gen(overfit_dir, false));

    report("loss sanity", [&] {
        if (gen_code != 0) return Outcome{false, "gen-synthetic failed"};
        ModelConfig model;
        const Dataset ds = load_dataset(DatasetPaths::standard(overfit_dir), model.d_q);
        model.num_answers = ds.answers.size();
        const auto params = init_model_params(model, ds.vocab, 0);
        const PreparedData data = prepare_data(ds, model);
        const EvalReport r =
            evaluate_model(data.eval, bind_model(params, model, ds.vocab.num_predicates()), model);
        std::map<std::size_t, std::size_t> per_answer;
        for (const auto& e : data.eval) ++per_answer[e.answer];
        const double ln8 = std::log(8.0);
        const double rel = std::abs(*r.mean_loss - ln8) / ln8;
        const bool balanced = per_answer.size() == 8 && per_answer.begin()->second == data.eval.size() / 8;
        return Outcome{model.num_answers == 8 && balanced && std::abs(r.overall - 0.125) <= 0.05 && rel <= 0.10,
                       "untrained eval accuracy " + fmt("%.4f", r.overall) + " on " + std::to_string(r.total) +
                           " balanced questions, initial loss " + fmt("%.4f", *r.mean_loss) + " (" +
                           fmt("%.1f", 100 * rel) + "% from ln 8)"};
    });

    report("synthetic overfit", [&] {
        if (gen_code != 0) return Outcome{false, "gen-synthetic failed"};
        const Dataset ds = load_dataset(DatasetPaths::standard(overfit_dir), 64);
        std::size_t right = 0, total = 0;
        for (const auto* split : {&ds.train, &ds.eval}) {
            for (const auto& s : *split) {
                ++total;
                right += rule_oracle(ds.video(s.video_id), ds.vocab, s.question) == ds.answers[s.answer_index];
            }
        }
        const fs::path out = work / "overfit_run";
        const auto t0 = Clock::now();
        const int code = run_cli({"train", "--head", "crn", "--data", overfit_dir.string(), "--out", out.string(),
                              "--stop-at-train-acc", "0.95"});
        const double t = seconds_since(t0);
        if (code != 0) return Outcome{false, "train exited with " + std::to_string(code)};
        const CsvLog log = read_loss_log(out / "loss_log.csv");
        const double final_train = read_json_file(out / "metrics.json")["train_report"]["overall"].get<double>();
        const double oracle = static_cast<double>(right) / static_cast<double>(total);
        return Outcome{log.best_train_acc >= 0.95 && log.epochs <= 200 && t < 300.0 && oracle == 1.0,
                       "train accuracy " + fmt("%.4f", log.best_train_acc) + " at epoch " +
                           std::to_string(log.first_epoch_at_95) + " (" + fmt("%.1f", t) +
                           " s), final train-split accuracy " + fmt("%.4f", final_train) + ", oracle " +
                           std::to_string(right) + "/" + std::to_string(total)};
    });

    report("ablation ordering", [&] {
        if (run_cli(overfit_gen(cross_dir, true)) != 0) return Outcome{false, "gen-synthetic --cross-frame failed"};
        const Dataset ds = load_dataset(DatasetPaths::standard(cross_dir), 64);
        std::size_t right = 0;
        for (const auto& s : ds.train) {
            right += rule_oracle(ds.video(s.video_id), ds.vocab, s.question) == ds.answers[s.answer_index];
        }
        double crn = 0.0, mlp = 0.0;
        std::string per_seed;
        for (int seed = 0; seed < 3; ++seed) {
            double acc[2];
            for (int h = 0; h < 2; ++h) {
                const std::string head = h == 0 ? "crn" : "mlp";
                const fs::path out = work / ("ablation_" + head + std::to_string(seed));
                if (run_cli({"train", "--head", head, "--data", cross_dir.string(), "--out", out.string(), "--epochs",
                         "30", "--seed", std::to_string(seed)}) != 0) {
                    return Outcome{false, head + " run failed"};
                }
                acc[h] = read_json_file(out / "metrics.json")["train_report"]["overall"].get<double>();
            }
            crn += acc[0] / 3.0;
            mlp += acc[1] / 3.0;
            per_seed += " " + fmt("%.3f", acc[0]) + "/" + fmt("%.3f", acc[1]);
        }
        return Outcome{crn >= mlp && right == ds.train.size(),
                       "mean train accuracy crn " + fmt("%.4f", crn) + " vs mlp " + fmt("%.4f", mlp) +
                           " after 30 epochs (per seed crn/mlp:" + per_seed + ")"};
    });

    report("determinism and serialization", [&] {
        if (gen_code != 0) return Outcome{false, "gen-synthetic failed"};
        std::vector<fs::path> runs{work / "det_a", work / "det_b"};
        for (const auto& out : runs) {
            if (run_cli({"train", "--data", overfit_dir.string(), "--out", out.string(), "--epochs", "3", "--seed",
                     "11", "--d-q", "64"}) != 0) {
                return Outcome{false, "train failed"};
            }
        }
        const auto a = file_bytes(runs[0] / "final.ghrc");
        const bool same = a == file_bytes(runs[1] / "final.ghrc") &&
                          file_bytes(runs[0] / "loss_log.csv") == file_bytes(runs[1] / "loss_log.csv");

        const ParamStore<float> loaded = load_checkpoint(runs[0] / "final.ghrc");
        save_checkpoint(work / "resaved.ghrc", loaded);
        const bool round_trip = encode_checkpoint(loaded) == a && file_bytes(work / "resaved.ghrc") == a &&
                                bit_equal(load_checkpoint(work / "resaved.ghrc"), loaded);

        ParamStore<float> target = loaded.clone();
        for (float& x : target.tensors().front().mutable_data()) x = 0.5f;
        const ParamStore<float> before = target.clone();
        std::size_t rejected = 0, tried = 0;
        for (std::size_t len = 0; len < a.size(); len += 1 + len / 64) {
            ++tried;
            std::ofstream(work / "cut.ghrc", std::ios::binary | std::ios::trunc)
                .write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(len));
            try {
                load_checkpoint_into(work / "cut.ghrc", target);
            } catch (const Error&) {
                ++rejected;
            }
        }
        const bool atomic = rejected == tried && bit_equal(target, before);
        return Outcome{same && round_trip && atomic,
                       std::string("identical runs ") + (same ? "yes" : "no") + ", bit-exact round trip " +
                           (round_trip ? "yes" : "no") + ", truncations rejected " + std::to_string(rejected) +
                           "/" + std::to_string(tried) + (atomic ? " with target untouched" : " (target modified)")};
    });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
