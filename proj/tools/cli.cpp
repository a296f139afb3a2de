// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include <CLI11.hpp>

#include "ghr/binary_io.hpp"
#include "ghr/dataset.hpp"
#include "ghr/error.hpp"
#include "ghr/synthetic.hpp"
#include "ghr/toy.hpp"
#include "ghr/train.hpp"

namespace ghr::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

struct Resolved {
    json values;
    std::set<std::string> explicit_keys;

    std::string required(const std::string& key) const {
        const json& v = values.at(key);
        if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) {
            throw UsageError("missing --" + dashed(key));
        }
        return v.get<std::string>();
    }
    std::optional<std::string> optional(const std::string& key) const {
        const json& v = values.at(key);
        if (v.is_null() || v.get<std::string>().empty()) return std::nullopt;
        return v.get<std::string>();
    }
};

/// Flags of one subcommand, declared from an object of default values. A
/// --config file may set any of the same keys; flags given on the command
/// line win.
class Settings {
public:
    Settings(CLI::App* app, json defaults) : defaults_(std::move(defaults)) {
        app->add_option("--config", config_path_, "JSON file whose keys mirror the flags");
        for (const auto& [key, value] : defaults_.items()) {
            if (value.is_boolean()) {
                bool& slot = bools_[key];
                options_[key] = value.get<bool>() ? app->add_flag("--no-" + dashed(key), slot)
                                                  : app->add_flag("--" + dashed(key), slot);
            } else {
                options_[key] = app->add_option("--" + dashed(key), raw_[key]);
            }
        }
    }

    Resolved resolve() const {
        Resolved r{defaults_, {}};
        if (!config_path_.empty()) {
            const json file = read_json_file(config_path_);
            if (!file.is_object()) throw UsageError("config file must hold a JSON object");
            for (const auto& [key, value] : file.items()) {
                if (!defaults_.contains(key)) throw UsageError("unknown config key \"" + key + "\"");
                r.values[key] = value;
                r.explicit_keys.insert(key);
            }
        }
        for (const auto& [key, opt] : options_) {
            if (opt->count() == 0) continue;
            const json& def = defaults_.at(key);
            r.values[key] = def.is_boolean() ? json(!def.get<bool>()) : convert(key, def, raw_.at(key));
            r.explicit_keys.insert(key);
        }
        return r;
    }

private:
    static json convert(const std::string& key, const json& def, const std::string& text) {
        auto unsigned_value = [&](const std::string& s) {
            std::size_t pos = 0;
            unsigned long long v = 0;
            try {
                if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
                v = std::stoull(s, &pos);
            } catch (const std::exception&) {
                pos = std::string::npos;
            }
            if (pos != s.size()) throw UsageError("--" + dashed(key) + " expects a non-negative integer");
            return v;
        };
        if (def.is_number_integer()) return unsigned_value(text);
        if (def.is_number_float()) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(text, &pos);
            } catch (const std::exception&) {
                pos = std::string::npos;
            }
            if (pos != text.size()) throw UsageError("--" + dashed(key) + " expects a number");
            return v;
        }
        if (def.is_array()) {
            json arr = json::array();
            std::size_t start = 0;
            while (start < text.size()) {
                const std::size_t comma = std::min(text.find(',', start), text.size());
                arr.push_back(unsigned_value(text.substr(start, comma - start)));
                start = comma + 1;
            }
            return arr;
        }
        return text;
    }

    json defaults_;
    std::string config_path_;
    std::map<std::string, std::string> raw_;
    std::map<std::string, bool> bools_;
    std::map<std::string, CLI::Option*> options_;
};

void write_text(const fs::path& p, const std::string& text) {
    io::write_file_atomic(p, std::vector<std::uint8_t>(text.begin(), text.end()));
}

json model_defaults() {
    json j = model_config_to_json(ModelConfig{});
    j.erase("answers");
    return j;
}

void print_report(std::ostream& out, const std::string& title, const EvalReport& r) {
    out << title << "\n";
    out << "  " << std::left << std::setw(14) << "category" << std::right << std::setw(8) << "count"
        << std::setw(10) << "accuracy" << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& [name, n] : r.counts) {
        out << "  " << std::left << std::setw(14) << name << std::right << std::setw(8) << n << std::setw(10)
            << r.per_category.at(name) << "\n";
    }
    out << "  " << std::left << std::setw(14) << "overall" << std::right << std::setw(8) << r.total
        << std::setw(10) << r.overall << "\n";
    if (r.mean_loss) out << "  mean loss " << *r.mean_loss << "\n";
    out << std::defaultfloat;
}

// ---- gen-synthetic ----

json gen_defaults() {
    const SyntheticOptions d;
    return {{"seed", d.seed},           {"videos", d.videos},         {"frames", d.frames},
            {"objects", d.objects},     {"predicates", d.predicates}, {"answers", d.answers},
            {"cross_frame", d.cross_frame}, {"eval_fraction", d.eval_fraction}, {"out", nullptr}};
}

int cmd_gen_synthetic(const Resolved& r, std::ostream& out) {
    const json& v = r.values;
    SyntheticOptions o;
    o.seed = v["seed"].get<std::uint64_t>();
    o.videos = v["videos"].get<std::size_t>();
    o.frames = v["frames"].get<std::size_t>();
    o.objects = v["objects"].get<std::size_t>();
    o.predicates = v["predicates"].get<std::size_t>();
    o.answers = v["answers"].get<std::size_t>();
    o.cross_frame = v["cross_frame"].get<bool>();
    o.eval_fraction = v["eval_fraction"].get<double>();
    const fs::path dir = r.required("out");
    o.validate();
    const SyntheticStats s = generate_synthetic(o, dir);
    out << "videos     " << s.videos << " (train " << s.train_videos << ", eval " << s.eval_videos << ")\n"
        << "frames     " << s.frames << "\n"
        << "nodes      " << s.nodes << "\n"
        << "edges      " << s.edges << "\n"
        << "questions  " << s.questions << "\n"
        << "answers   ";
    const auto vocab = synthetic_vocabulary(o.objects, o.predicates);
    for (std::size_t k = 0; k < s.answer_counts.size(); ++k) {
        out << " " << vocab.object_classes()[k + 1] << "=" << s.answer_counts[k];
    }
    out << "\nwrote " << dir.string() << "\n";
    return kExitOk;
}

// ---- build-graphs ----

json build_defaults() {
    return {{"videos", nullptr}, {"vocab", nullptr}, {"out", nullptr}, {"no_human", "skip"}};
}

int cmd_build_graphs(const Resolved& r, std::ostream& out) {
    const fs::path video_dir = r.required("videos");
    const fs::path out_dir = r.required("out");
    const std::string policy_name = r.values["no_human"].get<std::string>();
    NoHumanPolicy policy = NoHumanPolicy::Skip;
    if (policy_name == "synthetic") {
        policy = NoHumanPolicy::SyntheticRoot;
    } else if (policy_name != "skip") {
        throw UsageError("--no-human must be skip or synthetic");
    }
    const Vocabulary vocab = parse_vocabulary(read_json_file(r.required("vocab")));
    if (!fs::is_directory(video_dir)) throw UsageError("--videos " + video_dir.string() + " is not a directory");

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(video_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    fs::create_directories(out_dir);

    std::size_t nodes = 0, edges = 0, frames = 0, skipped = 0;
    json summary = json::array();
    for (const auto& f : files) {
        VideoGraph vg = [&] {
            try {
                return parse_video(read_json_file(f), vocab, policy);
            } catch (const Error& e) {
                throw Error(e.code(), f.string() + ": " + e.what());
            }
        }();
        write_graph_cache(out_dir / (vg.video_id() + ".ghrg"), vg, vocab);
        out << vg.video_id() << "  frames " << vg.num_frames() << "  nodes " << vg.num_nodes() << "  edges "
            << vg.num_edges() << "  skipped " << vg.skipped_frames() << "\n";
        summary.push_back({{"video_id", vg.video_id()},
                           {"frames", vg.num_frames()},
                           {"nodes", vg.num_nodes()},
                           {"edges", vg.num_edges()},
                           {"skipped_frames", vg.skipped_frames()}});
        nodes += vg.num_nodes();
        edges += vg.num_edges();
        frames += vg.num_frames();
        skipped += vg.skipped_frames();
    }
    out << "total  videos " << files.size() << "  frames " << frames << "  nodes " << nodes << "  edges "
        << edges << "  skipped " << skipped << "\n";
    write_text(out_dir / "summary.json", json{{"videos", summary},
                                              {"total", {{"videos", files.size()},
                                                         {"frames", frames},
                                                         {"nodes", nodes},
                                                         {"edges", edges},
                                                         {"skipped_frames", skipped}}}}
                                                 .dump(2) + "\n");
    return kExitOk;
}

// ---- train ----

json train_defaults() {
    json j = model_defaults();
    json t = train_config_to_json(TrainConfig{});
    t.erase("optimizer");
    t.erase("beta1");
    t.erase("beta2");
    t.erase("eps");
    j.update(t);
    j["data"] = nullptr;
    j["out"] = nullptr;
    j["embeddings"] = nullptr;
    return j;
}

DatasetPaths dataset_paths(const Resolved& r) {
    DatasetPaths p = DatasetPaths::standard(r.required("data"));
    if (auto e = r.optional("embeddings")) p.embeddings_path = *e;
    return p;
}

int cmd_train(const Resolved& r, std::ostream& out) {
    ModelConfig model = model_config_from_json(r.values);
    const TrainConfig tc = train_config_from_json(r.values);
    const DatasetPaths paths = dataset_paths(r);
    const fs::path out_dir = r.required("out");
    tc.validate();

    const Dataset ds = load_dataset(paths, model.d_q, model.no_human);
    model.num_answers = ds.answers.size();
    fs::create_directories(out_dir);
    write_text(out_dir / "config.json", r.values.dump(2) + "\n");

    ParamStore<float> params = init_model_params(model, ds.vocab, tc.seed);
    const PreparedData data = prepare_data(ds, model);
    out << "train samples " << data.train.size() << ", eval samples " << data.eval.size() << ", parameters "
        << params.total_elements() << "\n";

    const TrainResult result = train(params, model, data, tc, out_dir, [&](const EpochLog& e) {
        char line[128];
        std::snprintf(line, sizeof(line), "epoch %4zu  loss %.4f  train_acc %.4f", e.epoch, e.loss, e.train_acc);
        out << line;
        if (e.eval_acc) {
            std::snprintf(line, sizeof(line), "  eval_acc %.4f", *e.eval_acc);
            out << line;
        }
        out << "\n" << std::flush;
    });

    const ModelWeights<float> weights = bind_model(params, model, ds.vocab.num_predicates());
    const json config = {{"model", model_config_to_json(model)}, {"train", train_config_to_json(tc)}};
    EvalReport train_report = evaluate_model(data.train, weights, model, tc.threads);
    train_report.fingerprint = config_fingerprint(config);
    print_report(out, "train split", train_report);
    json metrics = config;
    metrics["epochs_run"] = result.log.size();
    metrics["best_epoch"] = result.best_epoch ? json(*result.best_epoch) : json(nullptr);
    metrics["train_report"] = train_report.to_json();
    metrics["eval_report"] = nullptr;
    if (!data.eval.empty()) {
        EvalReport eval_report = evaluate_model(data.eval, weights, model, tc.threads);
        eval_report.fingerprint = train_report.fingerprint;
        print_report(out, "eval split", eval_report);
        metrics["eval_report"] = eval_report.to_json();
    }
    write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
    out << "wrote " << (out_dir / "final.ghrc").string() << "\n";
    return kExitOk;
}

// ---- eval ----

json eval_defaults() {
    json j = model_defaults();
    j["data"] = nullptr;
    j["checkpoint"] = nullptr;
    j["split"] = "eval";
    j["threads"] = 1;
    j["out"] = nullptr;
    j["embeddings"] = nullptr;
    return j;
}

int cmd_eval(const Resolved& r, std::ostream& out) {
    const fs::path ckpt = r.required("checkpoint");
    const std::string split = r.values["split"].get<std::string>();
    if (split != "eval" && split != "train") throw UsageError("--split must be eval or train");
    const std::size_t threads = std::max<std::size_t>(1, r.values["threads"].get<std::size_t>());

    ModelConfig model;
    bool from_sidecar = false;
    if (fs::exists(sidecar_path(ckpt))) {
        model = model_config_from_json(read_json_file(sidecar_path(ckpt)).at("model"));
        from_sidecar = true;
    }
    json overrides = json::object();
    const json defaults = model_defaults();
    for (const auto& [key, value] : defaults.items()) {
        if (!from_sidecar || r.explicit_keys.count(key)) overrides[key] = r.values[key];
    }
    model = model_config_from_json(overrides, model);

    const Dataset ds = load_dataset(dataset_paths(r), model.d_q, model.no_human);
    if (!from_sidecar) model.num_answers = ds.answers.size();
    ParamStore<float> params = init_model_params(model, ds.vocab, 0);
    load_checkpoint_into(ckpt, params);
    const PreparedData data = prepare_data(ds, model);
    const ModelWeights<float> weights = bind_model(params, model, ds.vocab.num_predicates());
    EvalReport report = evaluate_model(split == "eval" ? data.eval : data.train, weights, model, threads);
    print_report(out, split + " split", report);
    out << report.to_json().dump() << "\n";
    if (auto dir = r.optional("out")) {
        fs::create_directories(*dir);
        write_text(fs::path(*dir) / ("metrics_" + split + ".json"),
                   json{{"model", model_config_to_json(model)}, {"checkpoint", ckpt.string()}, {"report", report.to_json()}}
                           .dump(2) + "\n");
    }
    return kExitOk;
}

// ---- grad-check ----

json grad_defaults() { return {{"scale", "tiny"}, {"seed", 0}, {"tolerance", 1e-3}}; }

int cmd_grad_check(const Resolved& r, std::ostream& out) {
    if (r.values["scale"].get<std::string>() != "tiny") throw UsageError("--scale supports only tiny");
    const double tol = r.values["tolerance"].get<double>();
    const ToyGradCheck g = toy_grad_check(r.values["seed"].get<std::uint64_t>());
    char line[256];
    std::snprintf(line, sizeof(line),
                  "checked %zu elements in %zu tensors (%.2fs)\nmax relative error %.3e at %s[%zu] "
                  "(analytic %.6e, numeric %.6e)\n",
                  g.report.elements_checked, g.parameters, g.seconds, g.report.max_rel_error,
                  g.report.worst_param.c_str(), g.report.worst_index, g.report.worst_analytic,
                  g.report.worst_numeric);
    out << line;
    const bool ok = g.report.passed(tol);
    out << (ok ? "PASS" : "FAIL") << " (tolerance " << tol << ")\n";
    return ok ? kExitOk : kExitNumerical;
}

// ---- inspect ----

json inspect_defaults() { return {{"graph", nullptr}, {"vocab", nullptr}, {"no_human", "skip"}}; }

int cmd_inspect(const Resolved& r, std::ostream& out) {
    const fs::path path = r.required("graph");
    std::optional<GraphCache> cache;
    if (path.extension() == ".ghrg") {
        cache.emplace(read_graph_cache(path));
    } else {
        const auto vocab_path = r.optional("vocab");
        if (!vocab_path) throw UsageError("--vocab is required for a JSON video");
        const Vocabulary vocab = parse_vocabulary(read_json_file(*vocab_path));
        const std::string p = r.values["no_human"].get<std::string>();
        if (p != "skip" && p != "synthetic") throw UsageError("--no-human must be skip or synthetic");
        cache.emplace(GraphCache{vocab, parse_video(read_json_file(path), vocab,
                                                    p == "skip" ? NoHumanPolicy::Skip : NoHumanPolicy::SyntheticRoot)});
    }
    const Vocabulary& vocab = cache->vocab;
    const VideoGraph& vg = cache->graph;
    out << "video " << vg.video_id() << ": " << vg.num_frames() << " frames (" << vg.skipped_frames()
        << " skipped), " << vg.num_nodes() << " nodes, " << vg.num_edges() << " edges\n";
    for (std::size_t f = 0; f < vg.num_frames(); ++f) {
        const auto& frame = vg.frames()[f];
        const auto& root = vg.human_roots()[f];
        out << "frame " << f << " (" << frame.frame_id << ")  human root "
            << (root.node_id ? std::to_string(*root.node_id) : std::string("synthetic")) << "\n";
        for (const auto& n : frame.nodes) {
            char box[96];
            std::snprintf(box, sizeof(box), "[%.3f %.3f %.3f %.3f]", n.bbox.x, n.bbox.y, n.bbox.w, n.bbox.h);
            out << "  node " << n.node_id << " " << vocab.object_classes()[n.class_index] << " " << box << "\n";
        }
        for (const auto& e : frame.edges) {
            out << "  edge " << e.subject_id << " -" << vocab.predicate_classes()[e.predicate_index] << "-> "
                << e.object_id << "\n";
        }
    }
    out << "human-to-human distances\n";
    for (std::size_t a = 0; a < vg.num_frames(); ++a) {
        for (std::size_t b = a + 1; b < vg.num_frames(); ++b) {
            const auto d = bfs_distance(vg, vg.human_root(a), vg.human_root(b));
            out << "  frame " << a << " - frame " << b << ": " << (d ? std::to_string(*d) : "unreachable") << "\n";
        }
    }
    return kExitOk;
}

struct Command {
    CLI::App* app;
    std::unique_ptr<Settings> settings;
    std::function<int(const Resolved&, std::ostream&)> handler;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Human-rooted graph reasoning for video question answering"};
    app.name("ghr");
    app.require_subcommand(1);

    std::vector<Command> commands;
    auto add = [&](const char* name, const char* help, json defaults,
                   std::function<int(const Resolved&, std::ostream&)> handler) {
        CLI::App* sub = app.add_subcommand(name, help);
        commands.push_back({sub, std::make_unique<Settings>(sub, std::move(defaults)), std::move(handler)});
    };
    add("build-graphs", "Validate frame annotations and write one graph cache per video", build_defaults(),
        cmd_build_graphs);
    add("gen-synthetic", "Write a seeded synthetic dataset", gen_defaults(), cmd_gen_synthetic);
    add("train", "Train a model and write checkpoints, loss log and metrics", train_defaults(), cmd_train);
    add("eval", "Evaluate a checkpoint on one split", eval_defaults(), cmd_eval);
    add("grad-check", "Compare analytic and numeric gradients on a toy sample", grad_defaults(),
        cmd_grad_check);
    add("inspect", "Print frames, human roots and human-to-human distances of a graph", inspect_defaults(),
        cmd_inspect);

    std::vector<std::string> storage{"ghr"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    for (const auto& cmd : commands) {
        if (!cmd.app->parsed()) continue;
        try {
            const Resolved r = cmd.settings->resolve();
            out << "config " << cmd.app->get_name() << " " << r.values.dump() << "\n";
            return cmd.handler(r, out);
        } catch (const UsageError& e) {
            err << "usage error: " << e.what() << "\n";
            return kExitUsage;
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return e.code() == ErrorCode::NonFiniteLoss ? kExitNumerical : kExitUsage;
        } catch (const json::exception& e) {
            err << "error: " << e.what() << "\n";
            return kExitUsage;
        } catch (const fs::filesystem_error& e) {
            err << "error: " << e.what() << "\n";
            return kExitUsage;
        }
    }
    return kExitUsage;
}

}  // namespace ghr::cli
