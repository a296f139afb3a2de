// SPDX-License-Identifier: Apache-2.0
#include "ghr/crn.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "ghr/error.hpp"

namespace ghr {

std::vector<std::size_t> CrnConfig::orders_for(std::size_t n) const {
    std::vector<std::size_t> out;
    if (orders.empty()) {
        const std::size_t top = std::max<std::size_t>(1, std::min(n == 0 ? 0 : n - 1, k_max));
        for (std::size_t k = 1; k <= top && k <= n; ++k) out.push_back(k);
        return out;
    }
    for (std::size_t k : orders) {
        if (k >= 1 && k <= n) out.push_back(k);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void CrnConfig::validate() const {
    if (d == 0 || subsets == 0 || clip_length == 0 || g_depth == 0 || p_depth == 0 || k_max == 0) {
        throw Error(ErrorCode::InvalidArgument, "CRN widths, t, clip length and depths must be >= 1");
    }
    for (std::size_t k : orders) {
        if (k == 0) throw Error(ErrorCode::InvalidOrder, "relation order 0");
    }
    if (orders_for(clip_length).empty()) {
        throw Error(ErrorCode::InvalidOrder, "no configured order fits the clip length");
    }
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t num = n - k + i;
        if (r > std::numeric_limits<std::size_t>::max() / num) {
            return std::numeric_limits<std::size_t>::max();
        }
        r = r * num / i;  // exact: r * num is divisible by i at every step
    }
    return r;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    return x ^ (x >> 33);
}

void enumerate(std::size_t n, std::size_t k, std::size_t start, Subset& current,
               std::vector<Subset>& out) {
    if (current.size() == k) {
        out.push_back(current);
        return;
    }
    for (std::size_t i = start; i + (k - current.size()) <= n; ++i) {
        current.push_back(i);
        enumerate(n, k, i + 1, current, out);
        current.pop_back();
    }
}

}  // namespace

std::vector<Subset> sample_subsets(std::size_t n, std::size_t k, std::size_t t,
                                   std::uint64_t seed, std::uint64_t unit_id) {
    if (k < 1 || k > n) {
        throw Error(ErrorCode::InvalidOrder, "order " + std::to_string(k) + " for arity " +
                                                 std::to_string(n));
    }
    if (t == 0) throw Error(ErrorCode::InvalidArgument, "t must be >= 1");
    std::vector<Subset> out;
    if (binomial(n, k) <= t) {
        Subset current;
        enumerate(n, k, 0, current, out);
        return out;
    }
    std::mt19937_64 rng(mix64(seed ^ mix64(unit_id ^ mix64(k + 0x9e3779b97f4a7c15ULL))));
    std::set<Subset> chosen;
    std::vector<std::size_t> pool(n);
    while (chosen.size() < t) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        Subset s(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(s.begin(), s.end());
        chosen.insert(std::move(s));
    }
    return {chosen.begin(), chosen.end()};
}

template <typename T>
Tensor<T> Mlp<T>::operator()(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) h = elu(add(matmul(h, weights[i]), biases[i]));
    return h;
}

namespace {

void register_mlp(ParamStore<float>& params, const std::string& prefix, std::size_t in,
                  std::size_t width, std::size_t depth, ParamInit& init) {
    for (std::size_t i = 0; i < depth; ++i) {
        params.add(prefix + ".w" + std::to_string(i), init.xavier(i == 0 ? in : width, width));
        params.add(prefix + ".b" + std::to_string(i), init.zeros({1, width}));
    }
}

template <typename T>
Mlp<T> bind_mlp(const ParamStore<T>& params, const std::string& prefix, std::size_t depth) {
    Mlp<T> m;
    for (std::size_t i = 0; i < depth; ++i) {
        m.weights.push_back(params.get(prefix + ".w" + std::to_string(i)));
        m.biases.push_back(params.get(prefix + ".b" + std::to_string(i)));
    }
    return m;
}

}  // namespace

void register_crn_params(ParamStore<float>& params, const CrnConfig& config, std::size_t d_frame,
                         std::size_t d_q, ParamInit& init) {
    config.validate();
    const std::size_t d = config.d;
    params.add("crn.proj.frame", init.xavier(d_frame, d));
    params.add("crn.proj.question", init.xavier(d_q, d));
    for (const char* level : {"clip", "video"}) {
        register_mlp(params, std::string("crn.") + level + ".g", 2 * d, d, config.g_depth, init);
        register_mlp(params, std::string("crn.") + level + ".p", 2 * d, d, config.p_depth, init);
    }
    params.add("crn.clip_out_proj", init.xavier(config.orders_for(config.clip_length).size() * d, d));
}

template <typename T>
CrnWeights<T> bind_crn(const ParamStore<T>& params, const CrnConfig& config) {
    CrnWeights<T> w;
    w.frame_proj = params.get("crn.proj.frame");
    w.question_proj = params.get("crn.proj.question");
    w.clip = {bind_mlp(params, "crn.clip.g", config.g_depth), bind_mlp(params, "crn.clip.p", config.p_depth)};
    w.video = {bind_mlp(params, "crn.video.g", config.g_depth),
               bind_mlp(params, "crn.video.p", config.p_depth)};
    w.clip_out_proj = params.get("crn.clip_out_proj");
    return w;
}

template <typename T>
std::vector<Tensor<T>> crn_unit(const Tensor<T>& inputs, const Tensor<T>& condition,
                                const CrnUnitWeights<T>& w, const CrnConfig& config,
                                std::uint64_t seed, std::uint64_t unit_id) {
    if (!inputs.defined() || inputs.rank() != 2 || inputs.dim(0) == 0) {
        throw Error(ErrorCode::EmptyInput, "CRN unit needs at least one input vector");
    }
    const std::size_t n = inputs.dim(0);
    std::vector<Tensor<T>> outputs;
    for (std::size_t k : config.orders_for(n)) {
        const auto subsets = sample_subsets(n, k, config.subsets, seed, unit_id);
        std::vector<Tensor<T>> pooled;
        pooled.reserve(subsets.size());
        for (const auto& s : subsets) {
            const Tensor<T> members = embedding_lookup(inputs, s);
            pooled.push_back(concat(std::vector<Tensor<T>>{mean(members, 0), max_rows(members)}, 1));
        }
        const Tensor<T> relational = w.g(concat(pooled, 0));  // [|subsets| x d]
        const Tensor<T> cond = embedding_lookup(condition, Index(subsets.size(), 0));
        const Tensor<T> fused = w.p(concat(std::vector<Tensor<T>>{relational, cond}, 1));
        outputs.push_back(mean(fused, 0));
    }
    return outputs;
}

template <typename T>
HierarchyOutput<T> hierarchy_forward(const Tensor<T>& frame_embeddings, const ClipPlan& clips,
                                     const Tensor<T>& question, const CrnWeights<T>& w,
                                     const CrnConfig& config, std::uint64_t seed) {
    if (frame_embeddings.rank() != 2 || frame_embeddings.dim(1) != w.frame_proj.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch, "frame embeddings " +
                                                  shape_string(frame_embeddings.shape()) +
                                                  " vs projection " +
                                                  shape_string(w.frame_proj.shape()));
    }
    if (clips.clips.empty()) throw Error(ErrorCode::EmptyInput, "empty clip plan");
    const Tensor<T> frames = matmul(frame_embeddings, w.frame_proj);
    const Tensor<T> q = reshape(question, {1, question.numel()});
    const Tensor<T> condition = matmul(q, w.question_proj);

    std::vector<Tensor<T>> clip_vectors;
    clip_vectors.reserve(clips.clips.size());
    for (std::size_t c = 0; c < clips.clips.size(); ++c) {
        for (std::size_t f : clips.clips[c]) {
            if (f >= frames.dim(0)) {
                throw Error(ErrorCode::IndexOutOfRange, "clip plan references frame " + std::to_string(f));
            }
        }
        const auto orders = crn_unit(embedding_lookup(frames, clips.clips[c]), condition, w.clip,
                                     config, seed, c);
        const Tensor<T> joined = orders.size() == 1 ? orders.front() : concat(orders, 1);
        clip_vectors.push_back(matmul(joined, w.clip_out_proj));
    }
    const auto video_orders =
        crn_unit(concat(clip_vectors, 0), condition, w.video, config, seed, kVideoUnitId);
    return {mean(concat(video_orders, 0), 0), condition};
}

void register_head_params(ParamStore<float>& params, HeadKind kind, std::size_t d,
                          std::size_t d_frame, std::size_t d_q, std::size_t hidden,
                          std::size_t num_answers, ParamInit& init) {
    if (num_answers < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 answers");
    const std::size_t in = kind == HeadKind::Crn ? 3 * d : d_frame + d;
    if (kind == HeadKind::Mlp) params.add("head.qproj", init.xavier(d_q, d));
    params.add("head.w1", init.xavier(in, hidden));
    params.add("head.b1", init.zeros({1, hidden}));
    params.add("head.w2", init.xavier(hidden, num_answers));
    params.add("head.b2", init.zeros({1, num_answers}));
}

template <typename T>
HeadWeights<T> bind_head(const ParamStore<T>& params, HeadKind kind) {
    HeadWeights<T> w{params.get("head.w1"), params.get("head.b1"), params.get("head.w2"),
                     params.get("head.b2"), {}};
    if (kind == HeadKind::Mlp) w.question_proj = params.get("head.qproj");
    return w;
}

namespace {

template <typename T>
Tensor<T> two_layer(const Tensor<T>& fused, const HeadWeights<T>& w) {
    if (fused.dim(1) != w.w1.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch, "decoder input " + shape_string(fused.shape()) +
                                                  " vs weights " + shape_string(w.w1.shape()));
    }
    const Tensor<T> hidden = elu(add(matmul(fused, w.w1), w.b1));
    return add(matmul(hidden, w.w2), w.b2);
}

}  // namespace

template <typename T>
Tensor<T> decode_answer(const Tensor<T>& video, const Tensor<T>& condition,
                        const HeadWeights<T>& w) {
    if (video.shape() != condition.shape()) {
        throw Error(ErrorCode::ShapeMismatch, "video " + shape_string(video.shape()) +
                                                  " vs condition " + shape_string(condition.shape()));
    }
    return two_layer(concat(std::vector<Tensor<T>>{video, condition, mul(video, condition)}, 1), w);
}

template <typename T>
Tensor<T> mlp_baseline_head(const Tensor<T>& aggregate, const Tensor<T>& question,
                            const HeadWeights<T>& w) {
    const Tensor<T> q = matmul(reshape(question, {1, question.numel()}), w.question_proj);
    const Tensor<T> agg = reshape(aggregate, {1, aggregate.numel()});
    return two_layer(concat(std::vector<Tensor<T>>{agg, q}, 1), w);
}

#define GHR_INSTANTIATE(T)                                                                     \
    template struct Mlp<T>;                                                                    \
    template CrnWeights<T> bind_crn(const ParamStore<T>&, const CrnConfig&);                   \
    template std::vector<Tensor<T>> crn_unit(const Tensor<T>&, const Tensor<T>&,               \
                                             const CrnUnitWeights<T>&, const CrnConfig&,       \
                                             std::uint64_t, std::uint64_t);                    \
    template HierarchyOutput<T> hierarchy_forward(const Tensor<T>&, const ClipPlan&,           \
                                                  const Tensor<T>&, const CrnWeights<T>&,      \
                                                  const CrnConfig&, std::uint64_t);            \
    template HeadWeights<T> bind_head(const ParamStore<T>&, HeadKind);                         \
    template Tensor<T> decode_answer(const Tensor<T>&, const Tensor<T>&, const HeadWeights<T>&); \
    template Tensor<T> mlp_baseline_head(const Tensor<T>&, const Tensor<T>&,                   \
                                         const HeadWeights<T>&);

GHR_INSTANTIATE(float)
GHR_INSTANTIATE(double)
#undef GHR_INSTANTIATE

}  // namespace ghr
