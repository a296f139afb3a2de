// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "ghr/dataset.hpp"
#include "ghr/video_graph.hpp"
#include "support.hpp"

using namespace ghr;
using namespace ghr::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = ghr::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> small_gen(const fs::path& out) {
    return {"gen-synthetic", "--videos", "6", "--frames", "4", "--objects", "6", "--predicates", "3",
            "--answers", "4", "--out", out.string()};
}

std::vector<std::string> small_model() {
    return {"--d-node", "8", "--d-edge", "4", "--heads", "2", "--d-head", "4", "--d", "8", "--d-q", "16",
            "--head-hidden", "8"};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == ghr::cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == ghr::cli::kExitUsage);
    const Result missing = run({"train", "--out", "/tmp/ghr_unused"});
    CHECK(missing.code == ghr::cli::kExitUsage);
    CHECK(missing.err.find("--data") != std::string::npos);
    CHECK(run({"train", "--epochs", "many"}).code == ghr::cli::kExitUsage);
    CHECK(run({"grad-check", "--scale", "huge"}).code == ghr::cli::kExitUsage);
    CHECK(run({"--help"}).code == ghr::cli::kExitOk);
}

TEST_CASE("gen-synthetic") {
    TempDir a("cli"), b("cli");
    const Result r = run(small_gen(a.path()));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("config gen-synthetic {", 0) == 0);
    run(small_gen(b.path()));
    for (const auto& name : {"vocab.json", "answers.json", "qa.jsonl", "split.json", "videos/vid0003.json"}) {
        CHECK(file_bytes(a / name) == file_bytes(b / name));
    }
    CHECK(run(small_gen(a.path()) + std::vector<std::string>{"--answers", "1"}).code == ghr::cli::kExitUsage);
    CHECK(run({"gen-synthetic"}).code == ghr::cli::kExitUsage);
}

TEST_CASE("generated data trains and evaluates") {
    TempDir data("cli"), run_dir("cli"), mlp_dir("cli"), eval_dir("cli");
    REQUIRE(run(small_gen(data.path())).code == 0);
    const auto train_args = std::vector<std::string>{"train", "--data", data.path().string(), "--epochs", "2",
                                                     "--out", run_dir.path().string()} +
                            small_model();
    const Result t = run(train_args);
    INFO(t.err);
    REQUIRE(t.code == 0);
    CHECK(t.out.find("epoch    2") != std::string::npos);
    for (const auto& f : {"config.json", "metrics.json", "loss_log.csv", "final.ghrc", "final.ghrc.json"}) {
        CHECK(fs::exists(run_dir / f));
    }
    const json metrics = read_json_file(run_dir / "metrics.json");
    CHECK(metrics["epochs_run"] == 2);
    CHECK(metrics["train_report"]["total"].get<int>() > 0);

    const Result m = run(std::vector<std::string>{"train", "--data", data.path().string(), "--epochs", "1",
                                                  "--head", "mlp", "--out", mlp_dir.path().string()} +
                         small_model());
    CHECK(m.code == 0);
    CHECK(read_json_file(mlp_dir / "metrics.json")["model"]["head"] == "mlp");

    const Result e = run({"eval", "--data", data.path().string(), "--checkpoint", (run_dir / "final.ghrc").string(),
                          "--out", eval_dir.path().string()});
    INFO(e.err);
    CHECK(e.code == 0);
    CHECK(fs::exists(eval_dir / "metrics_eval.json"));
    CHECK(read_json_file(eval_dir / "metrics_eval.json")["report"]["total"] ==
          read_json_file(run_dir / "metrics.json")["eval_report"]["total"]);

    const Result wrong = run({"eval", "--data", data.path().string(), "--checkpoint",
                              (run_dir / "final.ghrc").string(), "--d-node", "32"});
    CHECK(wrong.code == ghr::cli::kExitUsage);
    CHECK(wrong.err.find("ShapeMismatch") != std::string::npos);
}

TEST_CASE("config file mirrors flags and flags win") {
    TempDir dir("cli");
    const fs::path cfg = dir / "gen.json";
    std::ofstream(cfg) << R"({"videos": 3, "frames": 2, "objects": 5, "answers": 3, "predicates": 2, "seed": 4})";
    const Result r = run({"gen-synthetic", "--config", cfg.string(), "--seed", "9", "--out", (dir / "d").string()});
    REQUIRE(r.code == 0);
    const std::string first = r.out.substr(0, r.out.find('\n'));
    const json echoed = json::parse(first.substr(std::string("config gen-synthetic ").size()));
    CHECK(echoed["videos"] == 3);
    CHECK(echoed["seed"] == 9);
    CHECK(read_json_lines(dir / "d" / "qa.jsonl").size() > 0);

    std::ofstream(cfg) << R"({"videoz": 3})";
    CHECK(run({"gen-synthetic", "--config", cfg.string(), "--out", (dir / "e").string()}).code ==
          ghr::cli::kExitUsage);
}

TEST_CASE("build-graphs and inspect") {
    TempDir data("cli"), graphs("cli");
    auto gen = small_gen(data.path());
    gen[2] = "3";
    REQUIRE(run(gen).code == 0);
    const Result r = run({"build-graphs", "--videos", (data / "videos").string(), "--vocab",
                          (data / "vocab.json").string(), "--out", graphs.path().string()});
    REQUIRE(r.code == 0);
    std::size_t outputs = 0;
    for (const auto& e : fs::directory_iterator(graphs.path())) outputs += e.path().extension() == ".ghrg";
    CHECK(outputs == 3);
    const json summary = read_json_file(graphs / "summary.json");
    const Vocabulary vocab = parse_vocabulary(read_json_file(data / "vocab.json"));
    std::size_t total_nodes = 0;
    for (const auto& v : summary["videos"]) {
        const json doc = read_json_file(data / "videos" / (v["video_id"].get<std::string>() + ".json"));
        std::size_t nodes = 1, edges = 0;
        for (const auto& f : doc["frames"]) {
            nodes += f["objects"].size();
            edges += f["relationships"].size() + 1;
        }
        CHECK(v["nodes"] == nodes);
        CHECK(v["edges"] == edges);
        total_nodes += nodes;
    }
    CHECK(summary["total"]["nodes"] == total_nodes);

    const Result ins = run({"inspect", "--graph", (graphs / "vid0001.ghrg").string()});
    REQUIRE(ins.code == 0);
    const std::regex dist("frame \\d+ - frame \\d+: (\\S+)");
    int pairs = 0;
    for (std::sregex_iterator it(ins.out.begin(), ins.out.end(), dist), end; it != end; ++it) {
        CHECK((*it)[1] == "2");
        ++pairs;
    }
    CHECK(pairs == 6);
    const Result json_ins = run({"inspect", "--graph", (data / "videos" / "vid0000.json").string(), "--vocab",
                                 (data / "vocab.json").string()});
    CHECK(json_ins.code == 0);
    CHECK(run({"inspect", "--graph", (data / "videos" / "vid0000.json").string()}).code == ghr::cli::kExitUsage);

    std::ofstream(data / "videos" / "vid0001.json") << R"({"video_id": "vid0001", "frames": [{"frame_id": "f0",
        "objects": [{"id": 1, "label": "person", "bbox": [0, 0, 0.5, 0.5]}],
        "relationships": [{"subject": 1, "predicate": "holding", "object": 7}]}]})";
    const Result bad = run({"build-graphs", "--videos", (data / "videos").string(), "--vocab",
                            (data / "vocab.json").string(), "--out", graphs.path().string()});
    CHECK(bad.code == ghr::cli::kExitUsage);
    CHECK(bad.err.find("vid0001.json") != std::string::npos);
    CHECK(bad.err.find("DanglingEdge") != std::string::npos);
}

TEST_CASE("grad-check passes") {
    const Result r = run({"grad-check", "--seed", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("numerical failure exits with 3") {
    TempDir data("cli"), out("cli");
    REQUIRE(run(small_gen(data.path())).code == 0);
    const Result r = run(std::vector<std::string>{"train", "--data", data.path().string(), "--epochs", "5",
                                                  "--lr", "1e38", "--out", out.path().string()} +
                         small_model());
    CHECK(r.code == ghr::cli::kExitNumerical);
    CHECK(r.err.find("NonFiniteLoss") != std::string::npos);
}
