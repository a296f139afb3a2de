// SPDX-License-Identifier: Apache-2.0
#include "ghr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ghr/error.hpp"

namespace ghr {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
    if (shape.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor rank must be at least 1");
    }
    for (std::size_t d : shape) {
        if (d == 0) throw Error(ErrorCode::ShapeMismatch, "zero-sized dimension in " + shape_string(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw Error(ErrorCode::ShapeMismatch, "shape " + shape_string(shape) + " needs " +
                                                  std::to_string(shape_numel(shape)) +
                                                  " values, got " + std::to_string(data.size()));
    }
    node_ = std::make_shared<TensorNode<T>>(TensorNode<T>{std::move(shape), std::move(data), requires_grad});
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::matrix(const std::vector<std::vector<T>>& rows, bool requires_grad) {
    if (rows.empty() || rows.front().empty()) {
        throw Error(ErrorCode::ShapeMismatch, "empty matrix literal");
    }
    std::vector<T> data;
    for (const auto& r : rows) {
        if (r.size() != rows.front().size()) {
            throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), rows.front().size()}, std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::vector<T> values, bool requires_grad) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        throw Error(ErrorCode::NotScalar, "item() on tensor of shape " + shape_string(shape()));
    }
    return node_->data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t r, std::size_t c) const {
    if (rank() != 2 || r >= dim(0) || c >= dim(1)) {
        throw Error(ErrorCode::IndexOutOfRange, "at(" + std::to_string(r) + ", " +
                                                    std::to_string(c) + ") on " +
                                                    shape_string(shape()));
    }
    return node_->data[r * dim(1) + c];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    return Tensor(node_->shape, node_->data, node_->requires_grad);
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
GradTape<T>*& tape_slot() {
    thread_local GradTape<T>* slot = nullptr;
    return slot;
}

template <typename T>
GradTape<T>* active_tape() {
    return tape_slot<T>();
}

template <typename T>
TapeScope<T>::TapeScope(GradTape<T>* tape) : previous_(tape_slot<T>()) {
    tape_slot<T>() = tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
    tape_slot<T>() = previous_;
}

template <typename T>
void GradTape<T>::record(const NodePtr& output, BackwardFn fn) {
    output->requires_grad = true;
    outputs_.insert(output.get());
    records_.push_back(Record{output, std::move(fn)});
}

template <typename T>
std::vector<T>* GradTape<T>::accumulator(const NodePtr& node) {
    if (!node->requires_grad) return nullptr;
    auto [it, inserted] = grads_.try_emplace(node.get());
    if (inserted) it->second.assign(node->data.size(), T(0));
    return &it->second;
}

template <typename T>
const std::vector<T>* GradTape<T>::grad(const Tensor<T>& t) const {
    const auto it = grads_.find(t.node());
    return it == grads_.end() ? nullptr : &it->second;
}

template <typename T>
Tensor<T> GradTape<T>::grad_tensor(const Tensor<T>& t) const {
    const auto* g = grad(t);
    return g ? Tensor<T>(t.shape(), *g) : Tensor<T>::zeros(t.shape());
}

template <typename T>
void GradTape<T>::backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw Error(ErrorCode::NotScalar, "backward() needs a single-element loss");
    }
    if (!outputs_.count(loss.node())) {
        throw Error(ErrorCode::NoTape, "loss was not produced on this tape");
    }
    (*accumulator(loss.handle()))[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        const auto found = grads_.find(it->output.get());
        if (found == grads_.end()) continue;
        // std::unordered_map keeps element references stable across inserts.
        const std::vector<T>& g = found->second;
        it->fn(*this, g);
    }
}

template <typename T>
void GradTape<T>::clear() {
    records_.clear();
    outputs_.clear();
    grads_.clear();
}

// ---------------------------------------------------------------------------
// Op helpers

namespace {

template <typename T>
bool wants_grad(std::initializer_list<const Tensor<T>*> inputs) {
    if (!active_tape<T>()) return false;
    for (const auto* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

template <typename T>
void record(const Tensor<T>& out, typename GradTape<T>::BackwardFn fn) {
    active_tape<T>()->record(out.handle(), std::move(fn));
}

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op) {
    if (!t.defined() || t.rank() != 2) {
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(op) + " expects a rank-2 tensor, got " +
                        (t.defined() ? shape_string(t.shape()) : std::string("undefined")));
    }
}

Shape strip_leading_ones(const Shape& s) {
    std::size_t i = 0;
    while (i + 1 < s.size() && s[i] == 1) ++i;
    return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct Broadcast {
    Shape out;
    std::size_t a_mod;
    std::size_t b_mod;
};

Broadcast broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    const std::size_t na = shape_numel(a);
    const std::size_t nb = shape_numel(b);
    if (a == b) return {a, na, nb};
    const Shape sa = strip_leading_ones(a);
    const Shape sb = strip_leading_ones(b);
    if (na >= nb && is_suffix(sb, a)) return {a, na, nb};
    if (nb > na && is_suffix(sa, b)) return {b, na, nb};
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": cannot broadcast " +
                                              shape_string(a) + " with " + shape_string(b));
}

template <typename T, typename Fwd, typename Da, typename Db>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, Da da,
                    Db db) {
    const Broadcast bc = broadcast_shapes(a.shape(), b.shape(), name);
    const std::size_t n = shape_numel(bc.out);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i % bc.a_mod], bv[i % bc.b_mod]);
    Tensor<T> result(bc.out, std::move(out));
    if (wants_grad<T>({&a, &b})) {
        auto an = a.handle();
        auto bn = b.handle();
        record(result, [an, bn, bc, da, db](GradTape<T>& tape, const std::vector<T>& g) {
            auto* ga = tape.accumulator(an);
            auto* gb = tape.accumulator(bn);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T x = an->data[i % bc.a_mod];
                const T y = bn->data[i % bc.b_mod];
                if (ga) (*ga)[i % bc.a_mod] += g[i] * da(x, y);
                if (gb) (*gb)[i % bc.b_mod] += g[i] * db(x, y);
            }
        });
    }
    return result;
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary_op(const Tensor<T>& x, Fwd fwd, Deriv deriv) {
    const auto& xv = x.values();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    Tensor<T> result(x.shape(), std::move(out));
    if (wants_grad<T>({&x})) {
        auto xn = x.handle();
        record(result, [xn, deriv](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gx = tape.accumulator(xn);
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * deriv(xn->data[i]);
        });
    }
    return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra and layout

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw Error(ErrorCode::ShapeMismatch, "matmul: " + shape_string(a.shape()) + " x " +
                                                  shape_string(b.shape()));
    }
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(m * n, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        T* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T s = av[i * k + p];
            const T* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
    Tensor<T> result({m, n}, std::move(out));
    if (wants_grad<T>({&a, &b})) {
        auto an = a.handle();
        auto bn = b.handle();
        record(result, [an, bn, m, k, n](GradTape<T>& tape, const std::vector<T>& g) {
            if (auto* ga = tape.accumulator(an)) {
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        T acc = T(0);
                        const T* brow = bn->data.data() + p * n;
                        const T* grow = g.data() + i * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        (*ga)[i * k + p] += acc;
                    }
                }
            }
            if (auto* gb = tape.accumulator(bn)) {
                // dB = A^T * dC
                for (std::size_t i = 0; i < m; ++i) {
                    const T* grow = g.data() + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const T s = an->data[i * k + p];
                        T* dst = gb->data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) dst[j] += s * grow[j];
                    }
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw Error(ErrorCode::EmptyInput, "concat of zero tensors");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) {
        throw Error(ErrorCode::ShapeMismatch, "concat axis " + std::to_string(axis) +
                                                  " out of range for " + shape_string(first));
    }
    // outer = product of dims before axis; inner widths per part.
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
    std::vector<std::size_t> widths;
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) {
            if (d != axis && s[d] != first[d]) ok = false;
        }
        if (!ok) {
            throw Error(ErrorCode::ShapeMismatch, "concat: " + shape_string(s) + " vs " +
                                                      shape_string(first) + " on axis " +
                                                      std::to_string(axis));
        }
        out_shape[axis] += s[axis];
        widths.push_back(p.numel() / outer);
    }
    const std::size_t total_width = shape_numel(out_shape) / outer;
    std::vector<T> out(shape_numel(out_shape));
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& v = parts[i].values();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(v.data() + o * widths[i], widths[i],
                        out.data() + o * total_width + offset);
        }
        offset += widths[i];
    }
    Tensor<T> result(out_shape, std::move(out));
    bool any = false;
    for (const auto& p : parts) any = any || p.requires_grad();
    if (any && active_tape<T>()) {
        std::vector<typename Tensor<T>::NodePtr> nodes;
        for (const auto& p : parts) nodes.push_back(p.handle());
        record(result, [nodes, widths, outer, total_width](GradTape<T>& tape,
                                                           const std::vector<T>& g) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                if (auto* gi = tape.accumulator(nodes[i])) {
                    for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t c = 0; c < widths[i]; ++c) {
                            (*gi)[o * widths[i] + c] += g[o * total_width + off + c];
                        }
                    }
                }
                off += widths[i];
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw Error(ErrorCode::ShapeMismatch, "reshape " + shape_string(x.shape()) + " to " +
                                                  shape_string(shape));
    }
    Tensor<T> result(std::move(shape), x.values());
    if (wants_grad<T>({&x})) {
        auto xn = x.handle();
        record(result, [xn](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gx = tape.accumulator(xn);
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op<T>(
        a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
        [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op<T>(
        a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
        [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op<T>(
        a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
        [](T x, T) { return x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    return unary_op<T>(
        x, [factor](T v) { return v * factor; }, [factor](T) { return factor; });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    if (!(slope > T(0) && slope < T(1))) {
        throw Error(ErrorCode::InvalidArgument, "leaky_relu slope must lie in (0, 1)");
    }
    return unary_op<T>(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> elu(const Tensor<T>& x) {
    return unary_op<T>(
        x, [](T v) { return v > T(0) ? v : std::expm1(v); },
        [](T v) { return v > T(0) ? T(1) : std::exp(v); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.values()) acc += v;
    Tensor<T> result = Tensor<T>::scalar(acc);
    if (wants_grad<T>({&x})) {
        auto xn = x.handle();
        record(result, [xn](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gx = tape.accumulator(xn);
            for (auto& v : *gx) v += g[0];
        });
    }
    return result;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis) {
    require_rank2(x, "sum(axis)");
    if (axis > 1) throw Error(ErrorCode::ShapeMismatch, "sum axis must be 0 or 1");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    const auto& xv = x.values();
    Shape out_shape = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
    std::vector<T> out(shape_numel(out_shape), T(0));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[axis == 0 ? c : r] += xv[r * cols + c];
    }
    Tensor<T> result(out_shape, std::move(out));
    if (wants_grad<T>({&x})) {
        auto xn = x.handle();
        record(result, [xn, axis, rows, cols](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gx = tape.accumulator(xn);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    (*gx)[r * cols + c] += g[axis == 0 ? c : r];
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis) {
    require_rank2(x, "mean(axis)");
    if (axis > 1) throw Error(ErrorCode::ShapeMismatch, "mean axis must be 0 or 1");
    return scale(sum(x, axis), T(1) / static_cast<T>(x.dim(axis)));
}

template <typename T>
Tensor<T> max_rows(const Tensor<T>& x) {
    require_rank2(x, "max_rows");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    const auto& xv = x.values();
    std::vector<T> out(xv.begin(), xv.begin() + static_cast<std::ptrdiff_t>(cols));
    std::vector<std::size_t> arg(cols, 0);
    for (std::size_t r = 1; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (xv[r * cols + c] > out[c]) {
                out[c] = xv[r * cols + c];
                arg[c] = r;
            }
        }
    }
    Tensor<T> result({1, cols}, std::move(out));
    if (wants_grad<T>({&x})) {
        auto xn = x.handle();
        record(result, [xn, arg, cols](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gx = tape.accumulator(xn);
            for (std::size_t c = 0; c < cols; ++c) (*gx)[arg[c] * cols + c] += g[c];
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gather / scatter

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const Index& indices) {
    require_rank2(table, "embedding_lookup");
    if (indices.empty()) throw Error(ErrorCode::EmptyInput, "embedding_lookup with no indices");
    const std::size_t vocab = table.dim(0), d = table.dim(1);
    const auto& tv = table.values();
    std::vector<T> out(indices.size() * d);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= vocab) {
            throw Error(ErrorCode::IndexOutOfRange, "embedding index " + std::to_string(indices[i]) +
                                                        " >= " + std::to_string(vocab));
        }
        std::copy_n(tv.data() + indices[i] * d, d, out.data() + i * d);
    }
    Tensor<T> result({indices.size(), d}, std::move(out));
    if (wants_grad<T>({&table})) {
        auto tn = table.handle();
        record(result, [tn, indices, d](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gt = tape.accumulator(tn);
            for (std::size_t i = 0; i < indices.size(); ++i) {
                for (std::size_t c = 0; c < d; ++c) (*gt)[indices[i] * d + c] += g[i * d + c];
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& weights) {
    require_rank2(x, "scale_rows");
    const std::size_t m = x.dim(0), d = x.dim(1);
    if (weights.numel() != m) {
        throw Error(ErrorCode::ShapeMismatch, "scale_rows: " + shape_string(x.shape()) + " by " +
                                                  shape_string(weights.shape()));
    }
    const auto& xv = x.values();
    const auto& wv = weights.values();
    std::vector<T> out(m * d);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < d; ++c) out[i * d + c] = xv[i * d + c] * wv[i];
    }
    Tensor<T> result({m, d}, std::move(out));
    if (wants_grad<T>({&x, &weights})) {
        auto xn = x.handle();
        auto wn = weights.handle();
        record(result, [xn, wn, m, d](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gx = tape.accumulator(xn);
            auto* gw = tape.accumulator(wn);
            for (std::size_t i = 0; i < m; ++i) {
                T acc = T(0);
                for (std::size_t c = 0; c < d; ++c) {
                    if (gx) (*gx)[i * d + c] += g[i * d + c] * wn->data[i];
                    acc += g[i * d + c] * xn->data[i * d + c];
                }
                if (gw) (*gw)[i] += acc;
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& scores, const Index& segment_of) {
    if (!scores.defined() || scores.numel() == 0 || segment_of.empty()) {
        throw Error(ErrorCode::EmptyInput, "segment_softmax of no scores");
    }
    const std::size_t e = scores.numel();
    if (segment_of.size() != e) {
        throw Error(ErrorCode::ShapeMismatch, "segment_softmax: " + std::to_string(e) +
                                                  " scores but " +
                                                  std::to_string(segment_of.size()) + " segment ids");
    }
    const std::size_t n_seg = *std::max_element(segment_of.begin(), segment_of.end()) + 1;
    const auto& sv = scores.values();
    std::vector<T> seg_max(n_seg, -std::numeric_limits<T>::infinity());
    for (std::size_t i = 0; i < e; ++i) seg_max[segment_of[i]] = std::max(seg_max[segment_of[i]], sv[i]);
    std::vector<T> out(e);
    std::vector<T> seg_sum(n_seg, T(0));
    for (std::size_t i = 0; i < e; ++i) {
        out[i] = std::exp(sv[i] - seg_max[segment_of[i]]);
        seg_sum[segment_of[i]] += out[i];
    }
    for (std::size_t i = 0; i < e; ++i) out[i] /= seg_sum[segment_of[i]];
    Tensor<T> result(scores.shape(), std::move(out));
    if (wants_grad<T>({&scores})) {
        auto sn = scores.handle();
        auto yn = result.handle();
        record(result, [sn, yn, segment_of, n_seg](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gs = tape.accumulator(sn);
            const auto& y = yn->data;
            std::vector<T> dot(n_seg, T(0));
            for (std::size_t i = 0; i < y.size(); ++i) dot[segment_of[i]] += g[i] * y[i];
            for (std::size_t i = 0; i < y.size(); ++i) (*gs)[i] += y[i] * (g[i] - dot[segment_of[i]]);
        });
    }
    return result;
}

template <typename T>
Tensor<T> segment_sum(const Tensor<T>& values, const Index& segment_of, std::size_t n_segments) {
    if (!values.defined() || values.rank() > 2) {
        throw Error(ErrorCode::ShapeMismatch, "segment_sum expects [E] or [E x d] values");
    }
    const std::size_t e = values.dim(0);
    const std::size_t d = values.rank() == 2 ? values.dim(1) : 1;
    if (segment_of.size() != e) {
        throw Error(ErrorCode::ShapeMismatch, "segment_sum: " + std::to_string(e) + " rows but " +
                                                  std::to_string(segment_of.size()) +
                                                  " segment ids");
    }
    for (std::size_t s : segment_of) {
        if (s >= n_segments) {
            throw Error(ErrorCode::ShapeMismatch, "segment id " + std::to_string(s) +
                                                      " >= " + std::to_string(n_segments));
        }
    }
    const auto& vv = values.values();
    std::vector<T> out(n_segments * d, T(0));
    for (std::size_t i = 0; i < e; ++i) {
        T* dst = out.data() + segment_of[i] * d;
        const T* src = vv.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    Tensor<T> result({n_segments, d}, std::move(out));
    if (wants_grad<T>({&values})) {
        auto vn = values.handle();
        record(result, [vn, segment_of, d](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gv = tape.accumulator(vn);
            for (std::size_t i = 0; i < segment_of.size(); ++i) {
                for (std::size_t c = 0; c < d; ++c) (*gv)[i * d + c] += g[segment_of[i] * d + c];
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const Index& targets) {
    if (!logits.defined() || logits.rank() > 2) {
        throw Error(ErrorCode::ShapeMismatch, "softmax_cross_entropy expects [K] or [B x K] logits");
    }
    const std::size_t batch = logits.rank() == 2 ? logits.dim(0) : 1;
    const std::size_t k = logits.rank() == 2 ? logits.dim(1) : logits.dim(0);
    if (targets.size() != batch) {
        throw Error(ErrorCode::ShapeMismatch, "softmax_cross_entropy: " + std::to_string(batch) +
                                                  " rows but " + std::to_string(targets.size()) +
                                                  " targets");
    }
    const auto& lv = logits.values();
    std::vector<T> probs(lv.size());
    T total = T(0);
    for (std::size_t b = 0; b < batch; ++b) {
        if (targets[b] >= k) {
            throw Error(ErrorCode::IndexOutOfRange, "target " + std::to_string(targets[b]) +
                                                        " >= " + std::to_string(k));
        }
        const T* row = lv.data() + b * k;
        const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + k) - row);
        const T m = row[arg];
        T rest = T(0);  // sum of exp(x_j - m) for j != argmax
        for (std::size_t j = 0; j < k; ++j) {
            if (j != arg) rest += std::exp(row[j] - m);
        }
        // log-sum-exp - x_t = (m - x_t) + log1p(rest); keeps tiny losses representable.
        total += (m - row[targets[b]]) + std::log1p(rest);
        const T denom = T(1) + rest;
        for (std::size_t j = 0; j < k; ++j) probs[b * k + j] = std::exp(row[j] - m) / denom;
    }
    Tensor<T> result = Tensor<T>::scalar(total / static_cast<T>(batch));
    if (wants_grad<T>({&logits})) {
        auto ln = logits.handle();
        record(result, [ln, probs, targets, batch, k](GradTape<T>& tape, const std::vector<T>& g) {
            auto* gl = tape.accumulator(ln);
            const T s = g[0] / static_cast<T>(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t j = 0; j < k; ++j) {
                    const T onehot = j == targets[b] ? T(1) : T(0);
                    (*gl)[b * k + j] += s * (probs[b * k + j] - onehot);
                }
            }
        });
    }
    return result;
}

template <typename T>
FiniteCheck check_finite(const Tensor<T>& t) {
    const auto& v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return FiniteCheck{false, i};
    }
    return FiniteCheck{};
}

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    std::vector<To> out(t.values().begin(), t.values().end());
    return Tensor<To>(t.shape(), std::move(out), t.requires_grad());
}

// ---------------------------------------------------------------------------

#define GHR_INSTANTIATE(T)                                                                  \
    template class Tensor<T>;                                                               \
    template class GradTape<T>;                                                             \
    template class TapeScope<T>;                                                            \
    template GradTape<T>* active_tape<T>();                                                 \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                          \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                  \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
    template Tensor<T> scale(const Tensor<T>&, T);                                          \
    template Tensor<T> leaky_relu(const Tensor<T>&, T);                                     \
    template Tensor<T> elu(const Tensor<T>&);                                               \
    template Tensor<T> sum(const Tensor<T>&);                                               \
    template Tensor<T> mean(const Tensor<T>&);                                              \
    template Tensor<T> sum(const Tensor<T>&, std::size_t);                                  \
    template Tensor<T> mean(const Tensor<T>&, std::size_t);                                 \
    template Tensor<T> max_rows(const Tensor<T>&);                                          \
    template Tensor<T> embedding_lookup(const Tensor<T>&, const Index&);                    \
    template Tensor<T> scale_rows(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> segment_softmax(const Tensor<T>&, const Index&);                     \
    template Tensor<T> segment_sum(const Tensor<T>&, const Index&, std::size_t);            \
    template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const Index&);               \
    template FiniteCheck check_finite(const Tensor<T>&);

GHR_INSTANTIATE(float)
GHR_INSTANTIATE(double)
#undef GHR_INSTANTIATE

template Tensor<double> tensor_cast<double, float>(const Tensor<float>&);
template Tensor<float> tensor_cast<float, double>(const Tensor<double>&);
template Tensor<float> tensor_cast<float, float>(const Tensor<float>&);
template Tensor<double> tensor_cast<double, double>(const Tensor<double>&);

}  // namespace ghr
