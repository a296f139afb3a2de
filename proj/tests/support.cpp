// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <unistd.h>

namespace ghr::testing {

namespace fs = std::filesystem;

Vocabulary make_vocab(std::size_t n_objects, std::size_t n_predicates) {
    std::vector<std::string> objects{"person"};
    for (std::size_t i = 1; i < n_objects; ++i) objects.push_back("obj" + std::to_string(i));
    std::vector<std::string> preds;
    for (std::size_t i = 0; i < n_predicates; ++i) preds.push_back("rel" + std::to_string(i));
    return Vocabulary(objects, preds, {"person"});
}

namespace {

BBox random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> side(0.05, 0.6);
    const double w = side(rng);
    const double h = side(rng);
    std::uniform_real_distribution<double> px(0.0, 1.0 - w);
    std::uniform_real_distribution<double> py(0.0, 1.0 - h);
    return {px(rng), py(rng), w, h};
}

}  // namespace

FrameSceneGraph random_frame(std::mt19937_64& rng, const Vocabulary& vocab, std::size_t max_nodes,
                             double edge_prob, bool with_human, bool second_human,
                             const std::string& frame_id) {
    FrameSceneGraph g;
    g.frame_id = frame_id;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_nodes)(rng);
    std::vector<int> ids(40);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::uniform_int_distribution<std::size_t> other(1, vocab.num_objects() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const bool human = (i == 0 && with_human) || (i == 1 && with_human && second_human);
        g.nodes.push_back({ids[i], human ? 0 : other(rng), random_box(rng)});
    }
    std::bernoulli_distribution coin(edge_prob);
    std::uniform_int_distribution<std::size_t> pred(0, vocab.num_predicates() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!coin(rng)) continue;
            const bool flip = std::bernoulli_distribution(0.5)(rng);
            g.edges.push_back({g.nodes[flip ? j : i].node_id, pred(rng), g.nodes[flip ? i : j].node_id});
        }
    }
    return g;
}

std::vector<FrameSceneGraph> random_frames(std::mt19937_64& rng, const Vocabulary& vocab,
                                           const RandomFrameOptions& opt) {
    const std::size_t nf = std::uniform_int_distribution<std::size_t>(1, opt.max_frames)(rng);
    std::vector<FrameSceneGraph> frames;
    std::bernoulli_distribution humanless(opt.humanless_prob);
    std::bernoulli_distribution second(opt.second_human_prob);
    for (std::size_t f = 0; f < nf; ++f) {
        const bool with_human = f == 0 || !humanless(rng);
        frames.push_back(random_frame(rng, vocab, opt.max_nodes, opt.edge_prob, with_human, second(rng),
                                      "f" + std::to_string(f)));
    }
    std::shuffle(frames.begin(), frames.end(), rng);
    return frames;
}

VideoGraph random_video(std::mt19937_64& rng, const Vocabulary& vocab, const RandomFrameOptions& opt,
                        const std::string& id) {
    return build_video_graph(id, random_frames(rng, vocab, opt), vocab, NoHumanPolicy::Skip);
}

std::vector<FrameSceneGraph> permute_ids(std::mt19937_64& rng, const std::vector<FrameSceneGraph>& frames) {
    std::vector<FrameSceneGraph> out;
    for (const auto& f : frames) {
        std::vector<int> fresh(100);
        for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i] = static_cast<int>(i) + 500;
        std::shuffle(fresh.begin(), fresh.end(), rng);
        std::map<int, int> relabel;
        for (std::size_t i = 0; i < f.nodes.size(); ++i) relabel[f.nodes[i].node_id] = fresh[i];
        FrameSceneGraph g = f;
        for (auto& n : g.nodes) n.node_id = relabel.at(n.node_id);
        for (auto& e : g.edges) {
            e.subject_id = relabel.at(e.subject_id);
            e.object_id = relabel.at(e.object_id);
        }
        std::shuffle(g.nodes.begin(), g.nodes.end(), rng);
        std::shuffle(g.edges.begin(), g.edges.end(), rng);
        out.push_back(std::move(g));
    }
    return out;
}

template <typename T>
static Mat to_mat_impl(const Tensor<T>& t) {
    const std::size_t rows = t.rank() == 1 ? 1 : t.dim(0);
    const std::size_t cols = t.numel() / rows;
    Mat m(rows, Vec(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m[r][c] = static_cast<double>(t.data()[r * cols + c]);
    }
    return m;
}

Mat to_mat(const Tensor<float>& t) { return to_mat_impl(t); }
Mat to_mat(const Tensor<double>& t) { return to_mat_impl(t); }

namespace {

Vec vec_mat(const Vec& x, const Mat& w) {
    Vec y(w.empty() ? 0 : w[0].size(), 0.0);
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (std::size_t c = 0; c < y.size(); ++c) y[c] += x[r] * w[r][c];
    }
    return y;
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

}  // namespace

template <typename T>
DenseEncoding dense_encode(const VideoGraph& vg, const Vocabulary& vocab, const ParamStore<T>& params,
                           const SgemConfig& config) {
    auto P = [&](const std::string& name) { return to_mat(params.get(name)); };
    const std::size_t n_pred = vocab.num_predicates();
    const bool hetero = config.encoder == EncoderKind::HetEdgeGat;
    const std::size_t root_rel = hetero ? n_pred : 0;

    // Initial node features.
    const Mat objects = P("sgem.embed.object");
    const Mat root = P("sgem.embed.root");
    Mat bbox;
    if (config.use_bbox_features) bbox = P("sgem.embed.bbox");
    Mat x(vg.num_nodes(), Vec(config.d_node, 0.0));
    for (std::size_t i = 0; i < vg.num_nodes(); ++i) {
        const FlatNode& n = vg.nodes()[i];
        if (n.kind == FlatNodeKind::GlobalRoot) {
            x[i] = root[0];
        } else if (n.kind == FlatNodeKind::Entity) {
            x[i] = objects[n.class_index];
            if (config.use_bbox_features) {
                const Vec geom{n.bbox.x, n.bbox.y, n.bbox.w, n.bbox.h, n.bbox.w * n.bbox.h};
                const Vec g = vec_mat(geom, bbox);
                for (std::size_t c = 0; c < g.size(); ++c) x[i][c] += g[c];
            }
        }
    }

    const Mat pred_embed = P("sgem.embed.predicate");
    const Vec root_link = P("sgem.embed.root_link")[0];

    struct Neighbor {
        std::size_t node;
        std::size_t relation;
        Vec edge;
    };
    std::vector<std::vector<Neighbor>> adj(vg.num_nodes());
    for (const FlatEdge& e : vg.edges()) {
        const std::size_t r = !hetero ? 0 : (e.label.is_root_link() ? root_rel : e.label.predicate);
        const Vec feat = e.label.is_root_link() ? root_link : pred_embed[e.label.predicate];
        adj[e.a].push_back({e.b, r, feat});
        adj[e.b].push_back({e.a, r, feat});
    }

    DenseEncoding out;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        const std::string lp = "sgem.layer" + std::to_string(l);
        Mat y(vg.num_nodes(), Vec(config.d_out(), 0.0));
        for (std::size_t j = 0; j < vg.num_nodes(); ++j) {
            std::set<std::size_t> rels;
            for (const auto& nb : adj[j]) rels.insert(nb.relation);
            if (rels.empty()) {
                y[j] = vec_mat(x[j], P(lp + ".rel" + std::to_string(root_rel) + ".theta_s"));
                continue;
            }
            for (std::size_t r : rels) {
                const std::string rp = lp + ".rel" + std::to_string(r);
                const Vec self = vec_mat(x[j], P(rp + ".theta_s"));
                for (std::size_t c = 0; c < self.size(); ++c) y[j][c] += self[c];
                for (std::size_t h = 0; h < config.heads; ++h) {
                    const std::string hp = rp + ".head" + std::to_string(h);
                    const Mat tv = P(hp + ".theta_v");
                    const Mat te = P(hp + ".theta_e");
                    const Mat a = P(hp + ".attn");
                    const Vec qj = vec_mat(x[j], tv);
                    std::vector<Vec> values;
                    Vec scores;
                    DenseAttention record{l, j, r, h, {}, {}};
                    for (const auto& nb : adj[j]) {
                        if (nb.relation != r) continue;
                        const Vec qk = vec_mat(x[nb.node], tv);
                        const Vec ek = vec_mat(nb.edge, te);
                        double s = 0.0;
                        for (std::size_t c = 0; c < config.d_head; ++c) {
                            s += a[c][0] * qj[c] + a[config.d_head + c][0] * qk[c] +
                                 a[2 * config.d_head + c][0] * ek[c];
                        }
                        scores.push_back(s > 0.0 ? s : config.leaky_slope * s);
                        Vec v(config.d_head);
                        for (std::size_t c = 0; c < config.d_head; ++c) v[c] = qk[c] + ek[c];
                        values.push_back(v);
                        record.neighbors.push_back(nb.node);
                    }
                    const double m = *std::max_element(scores.begin(), scores.end());
                    double z = 0.0;
                    for (double s : scores) z += std::exp(s - m);
                    for (std::size_t k = 0; k < scores.size(); ++k) {
                        const double alpha = std::exp(scores[k] - m) / z;
                        record.alpha.push_back(alpha);
                        for (std::size_t c = 0; c < config.d_head; ++c) {
                            y[j][h * config.d_head + c] += alpha * values[k][c];
                        }
                    }
                    out.attention.push_back(std::move(record));
                }
            }
        }
        if (l + 1 < config.n_layers) {
            for (auto& row : y) {
                for (double& v : row) v = elu(v);
            }
        }
        x = std::move(y);
    }
    out.nodes = x;
    for (std::size_t f = 0; f < vg.num_frames(); ++f) out.frames.push_back(x[vg.human_root(f)]);
    return out;
}

template DenseEncoding dense_encode(const VideoGraph&, const Vocabulary&, const ParamStore<float>&,
                                    const SgemConfig&);
template DenseEncoding dense_encode(const VideoGraph&, const Vocabulary&, const ParamStore<double>&,
                                    const SgemConfig&);

namespace {

Vec run_mlp(Vec x, const std::vector<std::pair<Mat, Vec>>& layers) {
    for (const auto& [w, b] : layers) {
        Vec y = vec_mat(x, w);
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = elu(y[c] + b[c]);
        x = std::move(y);
    }
    return x;
}

}  // namespace

Mat dense_crn_unit(const Mat& inputs, const Vec& condition, const std::vector<std::pair<Mat, Vec>>& g,
                   const std::vector<std::pair<Mat, Vec>>& p, const std::vector<std::size_t>& orders) {
    const std::size_t n = inputs.size();
    const std::size_t d = inputs[0].size();
    Mat out;
    for (std::size_t k : orders) {
        Vec acc;
        std::size_t count = 0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
            Vec mean(d, 0.0);
            Vec mx(d, -HUGE_VAL);
            for (std::size_t i = 0; i < n; ++i) {
                if (!(mask & (1u << i))) continue;
                for (std::size_t c = 0; c < d; ++c) {
                    mean[c] += inputs[i][c] / static_cast<double>(k);
                    mx[c] = std::max(mx[c], inputs[i][c]);
                }
            }
            Vec pooled = mean;
            pooled.insert(pooled.end(), mx.begin(), mx.end());
            Vec fused = run_mlp(pooled, g);
            fused.insert(fused.end(), condition.begin(), condition.end());
            const Vec u = run_mlp(fused, p);
            if (acc.empty()) acc.assign(u.size(), 0.0);
            for (std::size_t c = 0; c < u.size(); ++c) acc[c] += u[c];
            ++count;
        }
        for (double& v : acc) v /= static_cast<double>(count);
        out.push_back(acc);
    }
    return out;
}

template <typename T>
std::vector<std::pair<Mat, Vec>> mlp_layers(const Mlp<T>& m) {
    std::vector<std::pair<Mat, Vec>> out;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        out.emplace_back(to_mat(m.weights[i]), to_mat(m.biases[i])[0]);
    }
    return out;
}

template std::vector<std::pair<Mat, Vec>> mlp_layers(const Mlp<float>&);
template std::vector<std::pair<Mat, Vec>> mlp_layers(const Mlp<double>&);

ModelConfig tiny_model(HeadKind head, std::size_t answers, std::size_t d_q) {
    ModelConfig c;
    c.head = head;
    c.sgem.d_node = 16;
    c.sgem.d_edge = 8;
    c.sgem.heads = 2;
    c.sgem.d_head = 8;
    c.crn.d = 16;
    c.d_q = d_q;
    c.head_hidden = 16;
    c.num_answers = answers;
    return c;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    if (a.size() != b.size()) return HUGE_VAL;
    double m = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (a[r].size() != b[r].size()) return HUGE_VAL;
        for (std::size_t c = 0; c < a[r].size(); ++c) m = std::max(m, std::abs(a[r][c] - b[r][c]));
    }
    return m;
}

TempDir::TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("ghr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ghr::testing
