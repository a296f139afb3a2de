// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ghr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
};

/// Shared handle to a dense row-major tensor. Copies alias the same storage;
/// operations never mutate their inputs.
template <typename T>
class Tensor {
public:
    using NodePtr = std::shared_ptr<TensorNode<T>>;

    Tensor() = default;
    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);
    /// Rank-2 tensor from nested rows.
    static Tensor matrix(const std::vector<std::vector<T>>& rows, bool requires_grad = false);
    static Tensor vector(std::vector<T> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const { return node_->data; }
    /// Direct write access; only for leaves (parameters, inputs) outside any
    /// recorded computation.
    std::span<T> mutable_data() { return node_->data; }
    const std::vector<T>& values() const { return node_->data; }

    T item() const;
    T at(std::size_t i) const { return node_->data.at(i); }
    T at(std::size_t r, std::size_t c) const;

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    /// Deep copy detached from any tape.
    Tensor clone() const;

    const TensorNode<T>* node() const { return node_.get(); }
    const NodePtr& handle() const { return node_; }

private:
    NodePtr node_;
};

/// Records operations whose inputs require gradients and replays them in
/// reverse. Gradients are owned by the tape, keyed by tensor node, so the same
/// parameters may be used concurrently by tapes on different threads.
template <typename T>
class GradTape {
public:
    using NodePtr = typename Tensor<T>::NodePtr;
    using BackwardFn = std::function<void(GradTape&, const std::vector<T>& grad_out)>;

    GradTape() = default;
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    void record(const NodePtr& output, BackwardFn fn);

    /// Seeds d(loss)/d(loss) = 1 and runs every record in reverse order.
    void backward(const Tensor<T>& loss);

    /// Gradient buffer for `node`, created zero-filled on first use, or
    /// nullptr when the node does not require gradients.
    std::vector<T>* accumulator(const NodePtr& node);

    /// Accumulated gradient of `t`, or nullptr when none reached it.
    const std::vector<T>* grad(const Tensor<T>& t) const;
    /// Gradient as a tensor shaped like `t` (zeros when none reached it).
    Tensor<T> grad_tensor(const Tensor<T>& t) const;

    std::size_t num_records() const { return records_.size(); }
    void clear();

private:
    struct Record {
        NodePtr output;
        BackwardFn fn;
    };
    std::vector<Record> records_;
    std::unordered_set<const TensorNode<T>*> outputs_;
    std::unordered_map<const TensorNode<T>*, std::vector<T>> grads_;
};

template <typename T>
GradTape<T>* active_tape();

/// Makes `tape` the active tape of the calling thread for the scope's
/// lifetime. Scopes nest; the previous tape is restored on exit.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(GradTape<T>* tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    GradTape<T>* previous_;
};

using Index = std::vector<std::size_t>;

// Forward operations. Each records itself on the active tape when any input
// requires gradients.

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Elementwise with leading-1 broadcasting of either operand.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T> Tensor<T> elu(const Tensor<T>& x);

/// Sum / mean of all elements as a shape-[1] tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// Rank-2 reductions; the reduced axis is kept with size 1.
template <typename T> Tensor<T> sum(const Tensor<T>& x, std::size_t axis);
template <typename T> Tensor<T> mean(const Tensor<T>& x, std::size_t axis);
/// Elementwise max over rows of [n x d] -> [1 x d]; ties route the gradient
/// to the first maximal row.
template <typename T> Tensor<T> max_rows(const Tensor<T>& x);

/// Rows of `table` at `indices`; backward scatter-adds into the table.
template <typename T> Tensor<T> embedding_lookup(const Tensor<T>& table, const Index& indices);
/// Multiplies row i of [m x d] by weights[i] (weights shaped [m] or [m x 1]).
template <typename T> Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& weights);

/// Softmax over entries that share a segment id. Scores are shaped [E] or
/// [E x 1]; the result has the same shape.
template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& scores, const Index& segment_of);
/// Sums rows of [E x d] into [n_segments x d]; empty segments give zero rows.
template <typename T>
Tensor<T> segment_sum(const Tensor<T>& values, const Index& segment_of, std::size_t n_segments);

/// Mean over the batch of -log softmax(logits)[target].
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const Index& targets);

struct FiniteCheck {
    bool ok = true;
    std::size_t first_bad_index = 0;
};

template <typename T> FiniteCheck check_finite(const Tensor<T>& t);

/// Converts element type, detached from any tape.
template <typename To, typename From> Tensor<To> tensor_cast(const Tensor<From>& t);

}  // namespace ghr
