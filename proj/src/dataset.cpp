// SPDX-License-Identifier: Apache-2.0
#include "ghr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ghr/error.hpp"

namespace ghr {

namespace fs = std::filesystem;

std::size_t category_index(std::string_view name) {
    for (std::size_t i = 0; i < kCategories.size(); ++i) {
        if (kCategories[i] == name) return i;
    }
    throw Error(ErrorCode::UnknownCategory, "\"" + std::string(name) + "\"");
}

DatasetPaths DatasetPaths::standard(const fs::path& dir) {
    DatasetPaths p;
    p.video_dir = dir / "videos";
    p.qa_path = dir / "qa.jsonl";
    p.vocab_path = dir / "vocab.json";
    p.answers_path = dir / "answers.json";
    if (fs::exists(dir / "split.json")) p.split_path = dir / "split.json";
    if (fs::exists(dir / "embeddings.ghrq")) p.embeddings_path = dir / "embeddings.ghrq";
    return p;
}

const VideoGraph& Dataset::video(const std::string& id) const {
    const auto it = videos.find(id);
    if (it == videos.end()) throw Error(ErrorCode::MissingVideo, "\"" + id + "\"");
    return it->second;
}

const QaSample* Dataset::find(const std::string& qa_id) const {
    for (const auto* split : {&train, &eval}) {
        for (const auto& s : *split) {
            if (s.qa_id == qa_id) return &s;
        }
    }
    return nullptr;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedFile, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedDocument, path.string() + ": " + e.what());
    }
}

std::vector<json> read_json_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedFile, "cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::MalformedDocument,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> parse_answers(const json& doc) {
    if (!doc.is_array()) throw Error(ErrorCode::MalformedDocument, "answers must be a JSON array");
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& a : doc) {
        if (!a.is_string()) throw Error(ErrorCode::MalformedDocument, "answers must be strings");
        if (!seen.insert(a.get<std::string>()).second) {
            throw Error(ErrorCode::DuplicateId, "answer \"" + a.get<std::string>() + "\" repeated");
        }
        out.push_back(a.get<std::string>());
    }
    if (out.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 answers");
    return out;
}

SplitManifest parse_split(const json& doc) {
    auto ids = [&](const char* key) {
        if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array()) {
            throw Error(ErrorCode::MalformedDocument,
                        std::string("split manifest needs a \"") + key + "\" array");
        }
        std::vector<std::string> v;
        for (const auto& x : doc[key]) {
            if (!x.is_string()) throw Error(ErrorCode::MalformedDocument, "video ids must be strings");
            v.push_back(x.get<std::string>());
        }
        return v;
    };
    SplitManifest m{ids("train"), ids("eval")};
    const std::set<std::string> train(m.train.begin(), m.train.end());
    for (const auto& id : m.eval) {
        if (train.count(id)) {
            throw Error(ErrorCode::SplitLeakage, "video \"" + id + "\" is in both splits");
        }
    }
    return m;
}

Dataset load_dataset(const DatasetPaths& paths, std::size_t question_dim, NoHumanPolicy policy) {
    Dataset ds;
    ds.vocab = parse_vocabulary(read_json_file(paths.vocab_path));
    ds.answers = parse_answers(read_json_file(paths.answers_path));

    if (!fs::is_directory(paths.video_dir)) {
        throw Error(ErrorCode::MalformedFile, "video directory " + paths.video_dir.string() + " not found");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(paths.video_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            VideoGraph vg = parse_video(read_json_file(f), ds.vocab, policy);
            const std::string id = vg.video_id();
            if (!ds.videos.emplace(id, std::move(vg)).second) {
                throw Error(ErrorCode::DuplicateId, "video \"" + id + "\" defined twice");
            }
        } catch (const Error& e) {
            throw Error(e.code(), f.string() + ": " + e.what());
        }
    }

    std::optional<SplitManifest> split;
    if (paths.split_path) split = parse_split(read_json_file(*paths.split_path));
    std::set<std::string> train_ids, eval_ids;
    if (split) {
        train_ids.insert(split->train.begin(), split->train.end());
        eval_ids.insert(split->eval.begin(), split->eval.end());
    }

    std::set<std::string> seen;
    const auto records = read_json_lines(paths.qa_path);
    for (std::size_t line = 0; line < records.size(); ++line) {
        const json& r = records[line];
        const std::string where = paths.qa_path.string() + " record " + std::to_string(line + 1);
        QaSample s;
        try {
            s.qa_id = r.at("qa_id").get<std::string>();
            s.video_id = r.at("video_id").get<std::string>();
            s.question = r.at("question").get<std::string>();
            const std::string answer = r.at("answer").get<std::string>();
            const auto it = std::find(ds.answers.begin(), ds.answers.end(), answer);
            if (it == ds.answers.end()) {
                throw Error(ErrorCode::UnknownAnswer, where + ": \"" + answer + "\"");
            }
            s.answer_index = static_cast<std::size_t>(it - ds.answers.begin());
            if (r.contains("category") && !r["category"].is_null()) {
                s.category = category_index(r["category"].get<std::string>());
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedDocument, where + ": " + e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::UnknownCategory) throw Error(e.code(), where + ": " + e.what());
            throw;
        }
        if (!seen.insert(s.qa_id).second) {
            throw Error(ErrorCode::DuplicateId, where + ": qa_id \"" + s.qa_id + "\" repeated");
        }
        if (!ds.videos.count(s.video_id)) {
            throw Error(ErrorCode::MissingVideo, where + ": video \"" + s.video_id + "\"");
        }
        if (!split || train_ids.count(s.video_id)) {
            ds.train.push_back(std::move(s));
        } else if (eval_ids.count(s.video_id)) {
            ds.eval.push_back(std::move(s));
        }
    }

    if (paths.embeddings_path) {
        ds.questions = load_embeddings(*paths.embeddings_path, question_dim);
        for (const auto* split_samples : {&ds.train, &ds.eval}) {
            for (const auto& s : *split_samples) {
                if (!ds.questions.count(s.qa_id)) {
                    throw Error(ErrorCode::MissingTensor, "no embedding for qa_id \"" + s.qa_id + "\"");
                }
            }
        }
    } else {
        for (const auto* split_samples : {&ds.train, &ds.eval}) {
            for (const auto& s : *split_samples) {
                ds.questions.emplace(s.qa_id, toy_embed(s.question, question_dim, s.qa_id));
            }
        }
    }
    return ds;
}

}  // namespace ghr
