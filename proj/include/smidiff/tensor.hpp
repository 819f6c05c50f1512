//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_TENSOR_HPP_
#define SMIDIFF_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace smidiff {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

namespace detail {

template <class S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;

  std::vector<S> &grad_buffer() {
    if (grad.empty())
      grad.assign(value.size(), S(0));
    return grad;
  }
};

}  // namespace detail

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

// Dense row-major tensor handle with reverse-mode differentiation. Copies
// share storage; ops produce new nodes.
template <class S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, S value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<S> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape &shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;

  std::span<const S> data() const;
  // Leaf storage, e.g. for optimizer updates. Never mutate a tensor that is
  // part of a live graph.
  std::span<S> mutable_data();

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const S> grad() const;  // empty before any backward
  std::span<S> mutable_grad();      // allocates
  void zero_grad();

  S item() const;

  // Throws NotScalar for non-scalar tensors and DetachedGraph when the
  // tensor was not produced by recorded operations on grad-requiring
  // inputs.
  void backward() const;

  // Same values, no history.
  Tensor detach() const;

  // Internal.
  explicit Tensor(std::shared_ptr<detail::Node<S>> node)
      : node_(std::move(node)) { }
  const std::shared_ptr<detail::Node<S>> &node() const { return node_; }

 private:
  std::shared_ptr<detail::Node<S>> node_;
};

enum class Reduction { kMean, kSum };

// a (..., M, K) x b (K, N) -> (..., M, N); or batched when b has the same
// leading dims as a. The transpose flags swap the two trailing axes.
template <class S>
Tensor<S> matmul(const Tensor<S> &a, const Tensor<S> &b, bool trans_a = false,
                 bool trans_b = false);

// b must equal a trailing suffix of a's shape.
template <class S>
Tensor<S> add(const Tensor<S> &a, const Tensor<S> &b);

template <class S>
Tensor<S> scale(const Tensor<S> &a, S factor);

template <class S>
Tensor<S> softmax(const Tensor<S> &a, int axis);

// Softmax over the last axis of scores (B, ..., K); key_mask has B * K
// entries, false entries receive probability exactly zero.
template <class S>
Tensor<S> masked_softmax(const Tensor<S> &scores,
                         const std::vector<std::uint8_t> &key_mask);

// Normalizes over the last axis, then applies gain and bias.
template <class S>
Tensor<S> layer_norm(const Tensor<S> &x, const Tensor<S> &gain,
                     const Tensor<S> &bias, S eps = S(1e-5));

template <class S>
Tensor<S> gelu(const Tensor<S> &x);

// table (V, D), ids of shape `ids_shape` -> (ids_shape..., D).
template <class S>
Tensor<S> embedding(const Tensor<S> &table, const std::vector<std::int32_t> &ids,
                    const Shape &ids_shape);

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>> &parts, int axis);

template <class S>
Tensor<S> slice(const Tensor<S> &a, int axis, std::int64_t start,
                std::int64_t length);

template <class S>
Tensor<S> transpose(const Tensor<S> &a, int axis0, int axis1);

template <class S>
Tensor<S> reshape(const Tensor<S> &a, Shape shape);

// x (B, D) -> (B, count, D).
template <class S>
Tensor<S> repeat_rows(const Tensor<S> &x, std::int64_t count);

template <class S>
Tensor<S> sum(const Tensor<S> &a);

template <class S>
Tensor<S> mse_loss(const Tensor<S> &pred, const Tensor<S> &target,
                   Reduction reduction = Reduction::kMean);

// logits (..., V) against integer targets, one per row.
template <class S>
Tensor<S> cross_entropy(const Tensor<S> &logits,
                        const std::vector<std::int32_t> &targets,
                        Reduction reduction = Reduction::kMean);

// x (..., D), table (V, D) -> (..., V) with entries -||x_r - table_v||^2.
template <class S>
Tensor<S> neg_sq_distance(const Tensor<S> &x, const Tensor<S> &table);

}  // namespace smidiff

#endif  // SMIDIFF_TENSOR_HPP_
