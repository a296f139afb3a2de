// SPDX-License-Identifier: Apache-2.0
#include "ghr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ghr/binary_io.hpp"
#include "ghr/dataset.hpp"
#include "ghr/error.hpp"
#include "ghr/question.hpp"

namespace ghr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kObjectNames[] = {
    "cup",    "dish",  "book",  "phone", "laptop", "towel",  "bag",    "pillow", "blanket",
    "door",   "sandwich", "broom", "mirror", "shoe", "box", "chair", "table", "sofa",
    "bed",    "window", "shelf", "vacuum", "picture", "doorknob", "food", "groceries",
    "clothes", "paper", "medicine", "camera"};

constexpr const char* kPredicateNames[] = {
    "holding", "touching", "opening", "eating",   "watching", "wiping",  "carrying",
    "drinking", "wearing", "throwing", "pushing", "pulling",  "closing", "cleaning",
    "fixing",  "taking",   "reading",  "cutting", "washing",  "using"};

constexpr std::size_t kMaxObjectsPerFrame = 3;

struct PlannedObject {
    std::size_t cls = 0;
    std::optional<std::size_t> human_predicate;
};

using FramePlan = std::vector<PlannedObject>;

bool has_class(const FramePlan& f, std::size_t cls) {
    return std::any_of(f.begin(), f.end(), [&](const PlannedObject& o) { return o.cls == cls; });
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Frames that can take one more object of class `cls`, skipping `exclude`.
std::vector<std::size_t> open_frames(const std::vector<FramePlan>& frames, std::size_t cls,
                                     const std::set<std::size_t>& exclude) {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (exclude.count(f) || frames[f].size() >= kMaxObjectsPerFrame || has_class(frames[f], cls)) {
            continue;
        }
        out.push_back(f);
    }
    return out;
}

std::optional<std::size_t> pick_frame(std::mt19937_64& rng, const std::vector<FramePlan>& frames,
                                      std::size_t cls, const std::set<std::size_t>& exclude) {
    const auto open = open_frames(frames, cls, exclude);
    if (open.empty()) return std::nullopt;
    return open[uniform(rng, 0, open.size() - 1)];
}

struct Plant {
    std::size_t frame;
    std::size_t predicate;
    std::size_t cls;
};

/// Chooses frames for all plants of one question on a scratch copy so a
/// question that does not fit leaves the video untouched.
std::optional<std::vector<Plant>> place(std::mt19937_64& rng, std::vector<FramePlan> frames,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& items,
                                        bool distinct_frames) {
    std::vector<Plant> out;
    std::set<std::size_t> used;
    for (const auto& [pred, cls] : items) {
        const auto f = pick_frame(rng, frames, cls, distinct_frames ? used : std::set<std::size_t>{});
        if (!f) return std::nullopt;
        frames[*f].push_back({cls, pred});
        used.insert(*f);
        out.push_back({*f, pred, cls});
    }
    return out;
}

json bbox_json(std::mt19937_64& rng, std::size_t min_side, std::size_t max_side) {
    const std::size_t w = uniform(rng, min_side, max_side);
    const std::size_t h = uniform(rng, min_side, max_side);
    const std::size_t x = uniform(rng, 0, 1000 - w);
    const std::size_t y = uniform(rng, 0, 1000 - h);
    return json::array({x / 1000.0, y / 1000.0, w / 1000.0, h / 1000.0});
}

}  // namespace

void SyntheticOptions::validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (videos < 1 || frames < 1 || objects < 1 || predicates < 1 || answers < 1) {
        bad("all sizes must be >= 1");
    }
    if (answers < 2) bad("answers must be >= 2");
    if (objects < 2) bad("objects must include \"person\" and at least one other class");
    if (answers > objects - 1) bad("answers cannot exceed the number of non-person classes");
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) bad("eval fraction must lie in [0, 1)");
    if (cross_frame) {
        if (predicates < 2) bad("cross-frame questions need at least 2 predicates");
        if (frames < 2) bad("cross-frame questions need at least 2 frames");
        if (objects < 4) bad("cross-frame questions need at least 3 non-person classes");
    }
}

Vocabulary synthetic_vocabulary(std::size_t objects, std::size_t predicates) {
    std::vector<std::string> obj{"person"};
    for (std::size_t i = 1; i < objects; ++i) {
        obj.push_back(i - 1 < std::size(kObjectNames) ? kObjectNames[i - 1]
                                                      : "object" + std::to_string(i));
    }
    std::vector<std::string> pred;
    for (std::size_t i = 0; i < predicates; ++i) {
        pred.push_back(i < std::size(kPredicateNames) ? kPredicateNames[i]
                                                      : "relating" + std::to_string(i));
    }
    return Vocabulary(std::move(obj), std::move(pred), {"person"});
}

SyntheticData make_synthetic(const SyntheticOptions& opt) {
    opt.validate();
    SyntheticData data;
    data.vocab = synthetic_vocabulary(opt.objects, opt.predicates);
    const auto& names = data.vocab.object_classes();
    const auto& preds = data.vocab.predicate_classes();
    for (std::size_t k = 1; k <= opt.answers; ++k) data.answers.push_back(names[k]);

    std::mt19937_64 rng(opt.seed);
    std::size_t question_counter = 0;
    const std::size_t n_eval =
        opt.videos < 2 ? 0
                       : std::min(opt.videos - 1,
                                  static_cast<std::size_t>(std::llround(opt.videos * opt.eval_fraction)));
    json train_ids = json::array();
    json eval_ids = json::array();

    for (std::size_t v = 0; v < opt.videos; ++v) {
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "vid%04zu", v);
        const std::string video_id = id_buf;

        std::vector<std::size_t> order(opt.predicates);
        for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
        std::shuffle(order.begin(), order.end(), rng);

        const std::size_t used_preds =
            opt.cross_frame ? 2 * std::min<std::size_t>(2, opt.predicates / 2)
                            : (opt.predicates >= 2 ? std::min<std::size_t>(4, opt.predicates - 1) : 1);
        const std::vector<std::size_t> distractors(order.begin() + used_preds, order.end());

        std::vector<FramePlan> frames(opt.frames);
        std::vector<std::pair<std::vector<std::size_t>, std::size_t>> questions;  // predicates, answer

        const std::size_t n_questions = opt.cross_frame ? used_preds / 2 : used_preds;
        for (std::size_t q = 0; q < n_questions; ++q) {
            const std::size_t answer_cls = 1 + question_counter % opt.answers;
            std::optional<std::vector<Plant>> plants;
            std::vector<std::size_t> qpreds;
            if (opt.cross_frame) {
                const std::size_t p1 = order[2 * q];
                const std::size_t p2 = order[2 * q + 1];
                qpreds = {p1, p2};
                std::vector<std::size_t> others;
                for (std::size_t c = 1; c < opt.objects; ++c) {
                    if (c != answer_cls) others.push_back(c);
                }
                std::shuffle(others.begin(), others.end(), rng);
                plants = place(rng, frames, {{p1, answer_cls}, {p2, answer_cls}}, true);
                if (plants) {
                    std::vector<FramePlan> trial = frames;
                    for (const auto& pl : *plants) trial[pl.frame].push_back({pl.cls, pl.predicate});
                    auto decoys = place(rng, trial, {{p1, others[0]}, {p2, others[1]}}, false);
                    if (decoys) {
                        plants->insert(plants->end(), decoys->begin(), decoys->end());
                    } else {
                        plants.reset();
                    }
                }
            } else {
                const std::size_t p = order[q];
                qpreds = {p};
                const std::size_t copies = std::min<std::size_t>(opt.frames, uniform(rng, 1, 2));
                plants = place(rng, frames,
                               std::vector<std::pair<std::size_t, std::size_t>>(copies, {p, answer_cls}),
                               true);
            }
            if (!plants) continue;
            for (const auto& pl : *plants) frames[pl.frame].push_back({pl.cls, pl.predicate});
            questions.emplace_back(qpreds, answer_cls);
            ++question_counter;
        }

        json frame_docs = json::array();
        std::size_t frame_index = 0;
        for (auto& plan : frames) {
            const std::size_t target = std::max(plan.size(), uniform(rng, 1, kMaxObjectsPerFrame));
            while (plan.size() < target) {
                std::vector<std::size_t> free;
                for (std::size_t c = 1; c < opt.objects; ++c) {
                    if (!has_class(plan, c)) free.push_back(c);
                }
                if (free.empty()) break;
                PlannedObject o{free[uniform(rng, 0, free.size() - 1)], std::nullopt};
                if (!distractors.empty()) o.human_predicate = distractors[uniform(rng, 0, distractors.size() - 1)];
                plan.push_back(o);
            }

            std::vector<int> ids(plan.size() + 1);
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
            std::shuffle(ids.begin(), ids.end(), rng);

            json objects = json::array();
            json rels = json::array();
            objects.push_back({{"id", ids[0]}, {"label", "person"}, {"bbox", bbox_json(rng, 300, 600)}});
            for (std::size_t i = 0; i < plan.size(); ++i) {
                const int id = ids[i + 1];
                objects.push_back({{"id", id}, {"label", names[plan[i].cls]}, {"bbox", bbox_json(rng, 50, 300)}});
                if (plan[i].human_predicate) {
                    rels.push_back({{"subject", ids[0]}, {"predicate", preds[*plan[i].human_predicate]}, {"object", id}});
                }
            }
            // Object-object clutter; unlinked objects always get one so no
            // object is isolated when there is a partner.
            for (std::size_t i = 0; i < plan.size(); ++i) {
                for (std::size_t j = i + 1; j < plan.size(); ++j) {
                    const bool forced = (!plan[i].human_predicate || !plan[j].human_predicate) && j == i + 1;
                    if (!forced && !std::bernoulli_distribution(0.2)(rng)) continue;
                    const std::size_t p = uniform(rng, 0, opt.predicates - 1);
                    const bool flip = std::bernoulli_distribution(0.5)(rng);
                    rels.push_back({{"subject", ids[(flip ? j : i) + 1]},
                                    {"predicate", preds[p]},
                                    {"object", ids[(flip ? i : j) + 1]}});
                }
            }
            frame_docs.push_back({{"frame_id", "f" + std::to_string(frame_index++)},
                                  {"objects", std::move(objects)},
                                  {"relationships", std::move(rels)}});
        }
        data.videos.push_back({{"video_id", video_id}, {"frames", std::move(frame_docs)}});

        for (std::size_t q = 0; q < questions.size(); ++q) {
            const auto& [qpreds, answer_cls] = questions[q];
            const std::string text = qpreds.size() == 1
                                         ? "what is the person " + preds[qpreds[0]] + "?"
                                         : "what was the person " + preds[qpreds[0]] + " and also " +
                                               preds[qpreds[1]] + "?";
            const std::size_t global = question_counter - questions.size() + q;
            data.qa.push_back({{"qa_id", video_id + "_q" + std::to_string(q)},
                               {"video_id", video_id},
                               {"question", text},
                               {"answer", names[answer_cls]},
                               {"category", std::string(kCategories[global % (kCategories.size() - 1)])}});
        }
        (v + n_eval >= opt.videos ? eval_ids : train_ids).push_back(video_id);
    }
    data.split = {{"train", train_ids}, {"eval", eval_ids}};
    return data;
}

json SyntheticStats::to_json() const {
    return {{"videos", videos},   {"train_videos", train_videos}, {"eval_videos", eval_videos},
            {"frames", frames},   {"nodes", nodes},               {"edges", edges},
            {"questions", questions}, {"answer_counts", answer_counts}};
}

SyntheticStats synthetic_stats(const SyntheticData& data) {
    SyntheticStats s;
    s.videos = data.videos.size();
    s.train_videos = data.split["train"].size();
    s.eval_videos = data.split["eval"].size();
    for (const auto& v : data.videos) {
        for (const auto& f : v["frames"]) {
            ++s.frames;
            s.nodes += f["objects"].size();
            s.edges += f["relationships"].size();
        }
    }
    s.questions = data.qa.size();
    s.answer_counts.assign(data.answers.size(), 0);
    for (const auto& q : data.qa) {
        const auto it = std::find(data.answers.begin(), data.answers.end(), q["answer"].get<std::string>());
        ++s.answer_counts[static_cast<std::size_t>(it - data.answers.begin())];
    }
    return s;
}

SyntheticStats generate_synthetic(const SyntheticOptions& options, const fs::path& out) {
    const SyntheticData data = make_synthetic(options);
    const fs::path video_dir = out / "videos";
    fs::create_directories(video_dir);
    for (const auto& entry : fs::directory_iterator(video_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") fs::remove(entry.path());
    }
    auto write_text = [](const fs::path& p, const std::string& text) {
        io::write_file_atomic(p, std::vector<std::uint8_t>(text.begin(), text.end()));
    };
    write_text(out / "vocab.json", data.vocab.to_json().dump(2) + "\n");
    write_text(out / "answers.json", json(data.answers).dump(2) + "\n");
    write_text(out / "split.json", data.split.dump(2) + "\n");
    std::string lines;
    for (const auto& q : data.qa) lines += q.dump() + "\n";
    write_text(out / "qa.jsonl", lines);
    for (const auto& v : data.videos) {
        write_text(video_dir / (v["video_id"].get<std::string>() + ".json"), v.dump() + "\n");
    }
    return synthetic_stats(data);
}

std::optional<std::string> rule_oracle(const VideoGraph& vg, const Vocabulary& vocab,
                                       std::string_view question) {
    std::vector<std::size_t> named;
    for (const auto& tok : tokenize_question(question)) {
        const int p = vocab.predicate_index(tok);
        if (p >= 0 && std::find(named.begin(), named.end(), static_cast<std::size_t>(p)) == named.end()) {
            named.push_back(static_cast<std::size_t>(p));
        }
    }
    if (named.empty()) return std::nullopt;

    std::set<std::size_t> roots;
    for (std::size_t f = 0; f < vg.num_frames(); ++f) roots.insert(vg.human_root(f));

    std::optional<std::set<std::size_t>> candidates;
    for (std::size_t p : named) {
        std::set<std::size_t> linked;
        for (const auto& e : vg.edges()) {
            if (e.label.is_root_link() || e.label.predicate != p) continue;
            for (const auto& [h, o] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
                if (roots.count(h) && vg.nodes()[o].kind == FlatNodeKind::Entity) {
                    linked.insert(vg.nodes()[o].class_index);
                }
            }
        }
        if (!candidates) {
            candidates = std::move(linked);
        } else {
            std::set<std::size_t> both;
            std::set_intersection(candidates->begin(), candidates->end(), linked.begin(), linked.end(),
                                  std::inserter(both, both.begin()));
            candidates = std::move(both);
        }
    }
    if (candidates->size() != 1) return std::nullopt;
    return vocab.object_classes()[*candidates->begin()];
}

}  // namespace ghr
