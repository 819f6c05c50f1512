//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <Eigen/Core>

#include "smidiff/errors.hpp"

namespace smidiff {

std::int64_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t { 1 },
                         std::multiplies<>());
}

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard(): previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
  g_grad_enabled = previous_;
}

bool NoGradGuard::grad_enabled() {
  return g_grad_enabled;
}

// ---------------------------------------------------------------------------
// Tensor

template <class S>
Tensor<S> Tensor<S>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), S(0), requires_grad);
}

template <class S>
Tensor<S> Tensor<S>::full(Shape shape, S value, bool requires_grad) {
  auto node = std::make_shared<detail::Node<S>>();
  node->value.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class S>
Tensor<S> Tensor<S>::from_data(Shape shape, std::vector<S> data,
                               bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
    throw ShapeMismatch("data of length " + std::to_string(data.size())
                        + " does not match shape " + shape_str(shape));
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class S>
const Shape &Tensor<S>::shape() const {
  return node_->shape;
}

template <class S>
std::int64_t Tensor<S>::dim(int axis) const {
  int r = rank();
  if (axis < 0)
    axis += r;
  if (axis < 0 || axis >= r)
    throw ShapeMismatch("axis " + std::to_string(axis) + " out of range for "
                        + shape_str(shape()));
  return shape()[axis];
}

template <class S>
std::int64_t Tensor<S>::numel() const {
  return static_cast<std::int64_t>(node_->value.size());
}

template <class S>
std::span<const S> Tensor<S>::data() const {
  return node_->value;
}

template <class S>
std::span<S> Tensor<S>::mutable_data() {
  return node_->value;
}

template <class S>
bool Tensor<S>::requires_grad() const {
  return node_->requires_grad;
}

template <class S>
bool Tensor<S>::has_grad() const {
  return !node_->grad.empty();
}

template <class S>
std::span<const S> Tensor<S>::grad() const {
  return node_->grad;
}

template <class S>
std::span<S> Tensor<S>::mutable_grad() {
  return node_->grad_buffer();
}

template <class S>
void Tensor<S>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), S(0));
}

template <class S>
S Tensor<S>::item() const {
  if (numel() != 1)
    throw NotScalar("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <class S>
void Tensor<S>::backward() const {
  if (numel() != 1)
    throw NotScalar("backward() requires a scalar loss, got shape "
                    + shape_str(shape()));
  if (!node_->requires_grad)
    throw DetachedGraph("loss does not depend on any grad-requiring tensor");

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node<S> *> order;
  std::unordered_set<detail::Node<S> *> seen;
  std::vector<std::pair<detail::Node<S> *, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<S> *p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second)
        stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<S> *node = *it;
    if (node->backward && !node->grad.empty())
      node->backward(*node);
  }
}

template <class S>
Tensor<S> Tensor<S>::detach() const {
  return from_data(shape(), node_->value, false);
}

// ---------------------------------------------------------------------------
// Op plumbing

namespace {

template <class S>
using Node = detail::Node<S>;

template <class S>
using NodePtr = std::shared_ptr<detail::Node<S>>;

template <class S>
Tensor<S> make_result(Shape shape, std::vector<S> value,
                      std::vector<NodePtr<S>> parents,
                      std::function<void(Node<S> &)> backward) {
  auto node = std::make_shared<Node<S>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = g_grad_enabled
               && std::any_of(parents.begin(), parents.end(),
                              [](const auto &p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor<S>(std::move(node));
}

int normalize_axis(int axis, int rank, const Shape &shape) {
  if (axis < 0)
    axis += rank;
  if (axis < 0 || axis >= rank)
    throw ShapeMismatch("axis out of range for shape " + shape_str(shape));
  return axis;
}

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;

// C (M x N) += op(A) op(B), with stored A of (M x K) or (K x M) when ta.
// Summation over k is strictly sequential.
template <class S>
void gemm_naive(std::int64_t m, std::int64_t n, std::int64_t k, const S *a,
                bool ta, const S *b, bool tb, S *c) {
  for (std::int64_t i = 0; i < m; ++i) {
    S *crow = c + i * n;
    if (!tb) {
      for (std::int64_t p = 0; p < k; ++p) {
        S av = ta ? a[p * m + i] : a[i * k + p];
        const S *brow = b + p * n;
        for (std::int64_t j = 0; j < n; ++j)
          crow[j] += av * brow[j];
      }
    } else {
      for (std::int64_t j = 0; j < n; ++j) {
        const S *brow = b + j * k;
        S acc = crow[j];
        for (std::int64_t p = 0; p < k; ++p)
          acc += (ta ? a[p * m + i] : a[i * k + p]) * brow[p];
        crow[j] = acc;
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul

template <class S>
Tensor<S> matmul(const Tensor<S> &a, const Tensor<S> &b, bool trans_a,
                 bool trans_b) {
  if (b.rank() == 2 && !trans_a) {
    if (a.rank() < 1)
      throw ShapeMismatch("matmul on a scalar");
    const std::int64_t k = a.shape().back();
    const std::int64_t bk = trans_b ? b.dim(1) : b.dim(0);
    const std::int64_t n = trans_b ? b.dim(0) : b.dim(1);
    if (k != bk)
      throw ShapeMismatch("matmul shapes " + shape_str(a.shape()) + " and "
                          + shape_str(b.shape())
                          + (trans_b ? " (b transposed)" : "")
                          + " are incompatible");
    const std::int64_t rows = a.numel() / std::max<std::int64_t>(k, 1);
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    std::vector<S> out(rows * n);
    {
      Eigen::Map<const RowMat<S>> am(a.data().data(), rows, k);
      Eigen::Map<RowMat<S>> cm(out.data(), rows, n);
      if (trans_b) {
        Eigen::Map<const RowMat<S>> bm(b.data().data(), n, k);
        cm.noalias() = am * bm.transpose();
      } else {
        Eigen::Map<const RowMat<S>> bm(b.data().data(), k, n);
        cm.noalias() = am * bm;
      }
    }
    auto an = a.node(), bn = b.node();
    return make_result<S>(
        std::move(out_shape), std::move(out), { an, bn },
        [an, bn, rows, k, n, trans_b](Node<S> &self) {
          Eigen::Map<const RowMat<S>> g(self.grad.data(), rows, n);
          if (an->requires_grad) {
            Eigen::Map<RowMat<S>> ga(an->grad_buffer().data(), rows, k);
            if (trans_b) {
              Eigen::Map<const RowMat<S>> bm(bn->value.data(), n, k);
              ga.noalias() += g * bm;
            } else {
              Eigen::Map<const RowMat<S>> bm(bn->value.data(), k, n);
              ga.noalias() += g * bm.transpose();
            }
          }
          if (bn->requires_grad) {
            Eigen::Map<const RowMat<S>> am(an->value.data(), rows, k);
            if (trans_b) {
              Eigen::Map<RowMat<S>> gb(bn->grad_buffer().data(), n, k);
              gb.noalias() += g.transpose() * am;
            } else {
              Eigen::Map<RowMat<S>> gb(bn->grad_buffer().data(), k, n);
              gb.noalias() += am.transpose() * g;
            }
          }
        });
  }

  // Batched: identical leading dims.
  const int r = a.rank();
  if (r < 2 || b.rank() != r
      || !std::equal(a.shape().begin(), a.shape().end() - 2,
                     b.shape().begin()))
    throw ShapeMismatch("batched matmul needs equal leading dims, got "
                        + shape_str(a.shape()) + " and "
                        + shape_str(b.shape()));
  const std::int64_t m = trans_a ? a.dim(-1) : a.dim(-2);
  const std::int64_t k = trans_a ? a.dim(-2) : a.dim(-1);
  const std::int64_t bk = trans_b ? b.dim(-1) : b.dim(-2);
  const std::int64_t n = trans_b ? b.dim(-2) : b.dim(-1);
  if (k != bk)
    throw ShapeMismatch("batched matmul shapes " + shape_str(a.shape())
                        + " and " + shape_str(b.shape())
                        + " are incompatible");
  const std::int64_t batch = a.numel() / std::max<std::int64_t>(m * k, 1);
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<S> out(batch * m * n, S(0));
  for (std::int64_t i = 0; i < batch; ++i)
    gemm_naive(m, n, k, a.data().data() + i * m * k, trans_a,
               b.data().data() + i * k * n, trans_b, out.data() + i * m * n);

  auto an = a.node(), bn = b.node();
  return make_result<S>(
      std::move(out_shape), std::move(out), { an, bn },
      [an, bn, batch, m, n, k, trans_a, trans_b](Node<S> &self) {
        for (std::int64_t i = 0; i < batch; ++i) {
          const S *g = self.grad.data() + i * m * n;
          const S *as = an->value.data() + i * m * k;
          const S *bs = bn->value.data() + i * k * n;
          if (an->requires_grad) {
            S *ga = an->grad_buffer().data() + i * m * k;
            if (!trans_a)
              gemm_naive(m, k, n, g, false, bs, !trans_b, ga);
            else
              gemm_naive(k, m, n, bs, trans_b, g, true, ga);
          }
          if (bn->requires_grad) {
            S *gb = bn->grad_buffer().data() + i * k * n;
            if (!trans_b)
              gemm_naive(k, n, m, as, !trans_a, g, false, gb);
            else
              gemm_naive(n, k, m, g, true, as, trans_a, gb);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise

template <class S>
Tensor<S> add(const Tensor<S> &a, const Tensor<S> &b) {
  if (b.rank() > a.rank())
    return add(b, a);
  if (!std::equal(b.shape().begin(), b.shape().end(),
                  a.shape().end() - b.rank()))
    throw ShapeMismatch("add: " + shape_str(b.shape())
                        + " is not a trailing suffix of "
                        + shape_str(a.shape()));
  const std::int64_t inner = b.numel();
  const std::int64_t outer = inner == 0 ? 0 : a.numel() / inner;
  std::vector<S> out(a.data().begin(), a.data().end());
  const S *bd = b.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    S *row = out.data() + o * inner;
    for (std::int64_t j = 0; j < inner; ++j)
      row[j] += bd[j];
  }
  auto an = a.node(), bn = b.node();
  return make_result<S>(a.shape(), std::move(out), { an, bn },
                        [an, bn, inner, outer](Node<S> &self) {
                          if (an->requires_grad) {
                            auto &ga = an->grad_buffer();
                            for (std::size_t i = 0; i < ga.size(); ++i)
                              ga[i] += self.grad[i];
                          }
                          if (bn->requires_grad) {
                            auto &gb = bn->grad_buffer();
                            for (std::int64_t o = 0; o < outer; ++o)
                              for (std::int64_t j = 0; j < inner; ++j)
                                gb[j] += self.grad[o * inner + j];
                          }
                        });
}

template <class S>
Tensor<S> scale(const Tensor<S> &a, S factor) {
  std::vector<S> out(a.data().begin(), a.data().end());
  for (auto &v: out)
    v *= factor;
  auto an = a.node();
  return make_result<S>(a.shape(), std::move(out), { an },
                        [an, factor](Node<S> &self) {
                          auto &ga = an->grad_buffer();
                          for (std::size_t i = 0; i < ga.size(); ++i)
                            ga[i] += factor * self.grad[i];
                        });
}

template <class S>
Tensor<S> gelu(const Tensor<S> &x) {
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  std::vector<S> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = S(0.5) * xd[i] * (S(1) + std::erf(xd[i] * inv_sqrt2));
  auto xn = x.node();
  return make_result<S>(
      x.shape(), std::move(out), { xn }, [xn, inv_sqrt2](Node<S> &self) {
        const S inv_sqrt_2pi = S(1) / std::sqrt(S(2) * S(M_PI));
        auto &gx = xn->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) {
          S v = xn->value[i];
          S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
          S pdf = inv_sqrt_2pi * std::exp(S(-0.5) * v * v);
          gx[i] += self.grad[i] * (cdf + v * pdf);
        }
      });
}

// ---------------------------------------------------------------------------
// Softmax family

template <class S>
Tensor<S> softmax(const Tensor<S> &a, int axis) {
  axis = normalize_axis(axis, a.rank(), a.shape());
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i)
    outer *= a.shape()[i];
  for (int i = axis + 1; i < a.rank(); ++i)
    inner *= a.shape()[i];
  const std::int64_t len = a.shape()[axis];

  std::vector<S> out(a.numel());
  auto ad = a.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * len * inner + in;
      S mx = -std::numeric_limits<S>::infinity();
      for (std::int64_t l = 0; l < len; ++l)
        mx = std::max(mx, ad[base + l * inner]);
      S total = 0;
      for (std::int64_t l = 0; l < len; ++l) {
        S e = std::exp(ad[base + l * inner] - mx);
        out[base + l * inner] = e;
        total += e;
      }
      for (std::int64_t l = 0; l < len; ++l)
        out[base + l * inner] /= total;
    }
  }
  auto an = a.node();
  return make_result<S>(
      a.shape(), std::move(out), { an },
      [an, outer, inner, len](Node<S> &self) {
        auto &ga = an->grad_buffer();
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * len * inner + in;
            S dot = 0;
            for (std::int64_t l = 0; l < len; ++l)
              dot += self.grad[base + l * inner] * self.value[base + l * inner];
            for (std::int64_t l = 0; l < len; ++l) {
              std::int64_t idx = base + l * inner;
              ga[idx] += self.value[idx] * (self.grad[idx] - dot);
            }
          }
        }
      });
}

template <class S>
Tensor<S> masked_softmax(const Tensor<S> &scores,
                         const std::vector<std::uint8_t> &key_mask) {
  if (scores.rank() < 2)
    throw ShapeMismatch("masked_softmax needs rank >= 2");
  const std::int64_t batch = scores.dim(0);
  const std::int64_t keys = scores.dim(-1);
  if (static_cast<std::int64_t>(key_mask.size()) != batch * keys)
    throw ShapeMismatch("key mask of size " + std::to_string(key_mask.size())
                        + " does not match scores "
                        + shape_str(scores.shape()));
  const std::int64_t rows = scores.numel() / keys;
  const std::int64_t rows_per_batch = rows / batch;

  std::vector<S> out(scores.numel(), S(0));
  auto sd = scores.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::uint8_t *mask = key_mask.data() + (r / rows_per_batch) * keys;
    const S *row = sd.data() + r * keys;
    S *orow = out.data() + r * keys;
    S mx = -std::numeric_limits<S>::infinity();
    for (std::int64_t j = 0; j < keys; ++j)
      if (mask[j])
        mx = std::max(mx, row[j]);
    if (mx == -std::numeric_limits<S>::infinity())
      continue;  // every key masked
    S total = 0;
    for (std::int64_t j = 0; j < keys; ++j) {
      if (mask[j]) {
        orow[j] = std::exp(row[j] - mx);
        total += orow[j];
      }
    }
    for (std::int64_t j = 0; j < keys; ++j)
      orow[j] /= total;
  }
  auto sn = scores.node();
  return make_result<S>(scores.shape(), std::move(out), { sn },
                        [sn, rows, keys](Node<S> &self) {
                          auto &gs = sn->grad_buffer();
                          for (std::int64_t r = 0; r < rows; ++r) {
                            const S *y = self.value.data() + r * keys;
                            const S *g = self.grad.data() + r * keys;
                            S dot = 0;
                            for (std::int64_t j = 0; j < keys; ++j)
                              dot += g[j] * y[j];
                            for (std::int64_t j = 0; j < keys; ++j)
                              gs[r * keys + j] += y[j] * (g[j] - dot);
                          }
                        });
}

template <class S>
Tensor<S> layer_norm(const Tensor<S> &x, const Tensor<S> &gain,
                     const Tensor<S> &bias, S eps) {
  const std::int64_t d = x.dim(-1);
  if (gain.numel() != d || bias.numel() != d)
    throw ShapeMismatch("layer_norm parameters must have " + std::to_string(d)
                        + " entries, got " + shape_str(gain.shape()) + " and "
                        + shape_str(bias.shape()));
  const std::int64_t rows = x.numel() / d;
  std::vector<S> out(x.numel());
  std::vector<S> xhat(x.numel());
  std::vector<S> rstd(rows);
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S *row = xd.data() + r * d;
    S mean = 0;
    for (std::int64_t j = 0; j < d; ++j)
      mean += row[j];
    mean /= S(d);
    S var = 0;
    for (std::int64_t j = 0; j < d; ++j)
      var += (row[j] - mean) * (row[j] - mean);
    var /= S(d);
    rstd[r] = S(1) / std::sqrt(var + eps);
    for (std::int64_t j = 0; j < d; ++j) {
      S h = (row[j] - mean) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gd[j] + bd[j];
    }
  }
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return make_result<S>(
      x.shape(), std::move(out), { xn, gn, bn },
      [xn, gn, bn, rows, d, xhat = std::move(xhat),
       rstd = std::move(rstd)](Node<S> &self) {
        if (gn->requires_grad || bn->requires_grad) {
          auto &gg = gn->grad_buffer();
          auto &gb = bn->grad_buffer();
          for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < d; ++j) {
              gg[j] += self.grad[r * d + j] * xhat[r * d + j];
              gb[j] += self.grad[r * d + j];
            }
        }
        if (xn->requires_grad) {
          auto &gx = xn->grad_buffer();
          for (std::int64_t r = 0; r < rows; ++r) {
            S mean_g = 0, mean_gx = 0;
            for (std::int64_t j = 0; j < d; ++j) {
              S dh = self.grad[r * d + j] * gn->value[j];
              mean_g += dh;
              mean_gx += dh * xhat[r * d + j];
            }
            mean_g /= S(d);
            mean_gx /= S(d);
            for (std::int64_t j = 0; j < d; ++j) {
              S dh = self.grad[r * d + j] * gn->value[j];
              gx[r * d + j] +=
                  rstd[r] * (dh - mean_g - xhat[r * d + j] * mean_gx);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Indexing and layout

template <class S>
Tensor<S> embedding(const Tensor<S> &table,
                    const std::vector<std::int32_t> &ids,
                    const Shape &ids_shape) {
  if (table.rank() != 2)
    throw ShapeMismatch("embedding table must be rank 2, got "
                        + shape_str(table.shape()));
  if (shape_numel(ids_shape) != static_cast<std::int64_t>(ids.size()))
    throw ShapeMismatch("ids do not match shape " + shape_str(ids_shape));
  const std::int64_t vocab = table.dim(0), d = table.dim(1);
  std::vector<S> out(ids.size() * d);
  auto td = table.data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= vocab)
      throw IdOutOfRange("id " + std::to_string(ids[r])
                         + " outside embedding table of " + std::to_string(vocab)
                         + " rows");
    std::copy_n(td.begin() + ids[r] * d, d, out.begin() + r * d);
  }
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  auto tn = table.node();
  return make_result<S>(std::move(out_shape), std::move(out), { tn },
                        [tn, ids, d](Node<S> &self) {
                          auto &gt = tn->grad_buffer();
                          for (std::size_t r = 0; r < ids.size(); ++r)
                            for (std::int64_t j = 0; j < d; ++j)
                              gt[ids[r] * d + j] += self.grad[r * d + j];
                        });
}

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>> &parts, int axis) {
  if (parts.empty())
    throw ShapeMismatch("concat of zero tensors");
  const Shape &ref = parts[0].shape();
  axis = normalize_axis(axis, static_cast<int>(ref.size()), ref);
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i)
    outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i)
    inner *= ref[i];
  std::int64_t total = 0;
  std::vector<std::int64_t> lens;
  for (const auto &p: parts) {
    if (p.rank() != static_cast<int>(ref.size()))
      throw ShapeMismatch("concat rank mismatch: " + shape_str(ref) + " vs "
                          + shape_str(p.shape()));
    for (int i = 0; i < p.rank(); ++i)
      if (i != axis && p.shape()[i] != ref[i])
        throw ShapeMismatch("concat shape mismatch: " + shape_str(ref)
                            + " vs " + shape_str(p.shape()));
    lens.push_back(p.shape()[axis]);
    total += p.shape()[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  std::vector<S> out(outer * total * inner);
  std::int64_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    const std::int64_t chunk = lens[k] * inner;
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(pd.begin() + o * chunk, chunk,
                  out.begin() + o * total * inner + offset * inner);
    offset += lens[k];
  }
  std::vector<NodePtr<S>> nodes;
  for (const auto &p: parts)
    nodes.push_back(p.node());
  return make_result<S>(
      std::move(out_shape), std::move(out), nodes,
      [nodes, lens, outer, inner, total](Node<S> &self) {
        std::int64_t offset = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const std::int64_t chunk = lens[k] * inner;
          if (nodes[k]->requires_grad) {
            auto &g = nodes[k]->grad_buffer();
            for (std::int64_t o = 0; o < outer; ++o)
              for (std::int64_t j = 0; j < chunk; ++j)
                g[o * chunk + j] +=
                    self.grad[o * total * inner + offset * inner + j];
          }
          offset += lens[k];
        }
      });
}

template <class S>
Tensor<S> slice(const Tensor<S> &a, int axis, std::int64_t start,
                std::int64_t length) {
  axis = normalize_axis(axis, a.rank(), a.shape());
  const std::int64_t full = a.shape()[axis];
  if (start < 0 || length < 0 || start + length > full)
    throw ShapeMismatch("slice [" + std::to_string(start) + ", "
                        + std::to_string(start + length) + ") out of range for "
                        + shape_str(a.shape()) + " along axis "
                        + std::to_string(axis));
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i)
    outer *= a.shape()[i];
  for (int i = axis + 1; i < a.rank(); ++i)
    inner *= a.shape()[i];
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  std::vector<S> out(outer * length * inner);
  auto ad = a.data();
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy_n(ad.begin() + (o * full + start) * inner, length * inner,
                out.begin() + o * length * inner);
  auto an = a.node();
  return make_result<S>(
      std::move(out_shape), std::move(out), { an },
      [an, outer, inner, full, start, length](Node<S> &self) {
        auto &g = an->grad_buffer();
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t j = 0; j < length * inner; ++j)
            g[(o * full + start) * inner + j] +=
                self.grad[o * length * inner + j];
      });
}

namespace {

// Gather index map for swapping two axes.
std::vector<std::int64_t> swap_axes_index(const Shape &shape, int a0, int a1) {
  const int r = static_cast<int>(shape.size());
  std::vector<std::int64_t> in_strides(r, 1);
  for (int i = r - 2; i >= 0; --i)
    in_strides[i] = in_strides[i + 1] * shape[i + 1];
  Shape out_shape = shape;
  std::swap(out_shape[a0], out_shape[a1]);
  std::vector<std::int64_t> strides = in_strides;
  std::swap(strides[a0], strides[a1]);

  const std::int64_t total = shape_numel(shape);
  std::vector<std::int64_t> index(total);
  std::vector<std::int64_t> coord(r, 0);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    index[o] = src;
    for (int i = r - 1; i >= 0; --i) {
      if (++coord[i] < out_shape[i]) {
        src += strides[i];
        break;
      }
      src -= strides[i] * (out_shape[i] - 1);
      coord[i] = 0;
    }
  }
  return index;
}

}  // namespace

template <class S>
Tensor<S> transpose(const Tensor<S> &a, int axis0, int axis1) {
  axis0 = normalize_axis(axis0, a.rank(), a.shape());
  axis1 = normalize_axis(axis1, a.rank(), a.shape());
  Shape out_shape = a.shape();
  std::swap(out_shape[axis0], out_shape[axis1]);
  auto index = swap_axes_index(a.shape(), axis0, axis1);
  std::vector<S> out(a.numel());
  auto ad = a.data();
  for (std::size_t o = 0; o < index.size(); ++o)
    out[o] = ad[index[o]];
  auto an = a.node();
  return make_result<S>(std::move(out_shape), std::move(out), { an },
                        [an, index = std::move(index)](Node<S> &self) {
                          auto &g = an->grad_buffer();
                          for (std::size_t o = 0; o < index.size(); ++o)
                            g[index[o]] += self.grad[o];
                        });
}

template <class S>
Tensor<S> reshape(const Tensor<S> &a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeMismatch("cannot reshape " + shape_str(a.shape()) + " to "
                        + shape_str(shape));
  std::vector<S> out(a.data().begin(), a.data().end());
  auto an = a.node();
  return make_result<S>(std::move(shape), std::move(out), { an },
                        [an](Node<S> &self) {
                          auto &g = an->grad_buffer();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i];
                        });
}

template <class S>
Tensor<S> repeat_rows(const Tensor<S> &x, std::int64_t count) {
  if (x.rank() != 2)
    throw ShapeMismatch("repeat_rows expects (B, D), got "
                        + shape_str(x.shape()));
  const std::int64_t b = x.dim(0), d = x.dim(1);
  std::vector<S> out(b * count * d);
  auto xd = x.data();
  for (std::int64_t i = 0; i < b; ++i)
    for (std::int64_t c = 0; c < count; ++c)
      std::copy_n(xd.begin() + i * d, d, out.begin() + (i * count + c) * d);
  auto xn = x.node();
  return make_result<S>({ b, count, d }, std::move(out), { xn },
                        [xn, b, count, d](Node<S> &self) {
                          auto &g = xn->grad_buffer();
                          for (std::int64_t i = 0; i < b; ++i)
                            for (std::int64_t c = 0; c < count; ++c)
                              for (std::int64_t j = 0; j < d; ++j)
                                g[i * d + j] +=
                                    self.grad[(i * count + c) * d + j];
                        });
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <class S>
Tensor<S> sum(const Tensor<S> &a) {
  S total = 0;
  for (S v: a.data())
    total += v;
  auto an = a.node();
  return make_result<S>({}, { total }, { an }, [an](Node<S> &self) {
    auto &g = an->grad_buffer();
    for (auto &v: g)
      v += self.grad[0];
  });
}

template <class S>
Tensor<S> mse_loss(const Tensor<S> &pred, const Tensor<S> &target,
                   Reduction reduction) {
  if (pred.shape() != target.shape())
    throw ShapeMismatch("mse_loss shapes differ: " + shape_str(pred.shape())
                        + " vs " + shape_str(target.shape()));
  auto pd = pred.data(), td = target.data();
  S total = 0;
  for (std::size_t i = 0; i < pd.size(); ++i) {
    S diff = pd[i] - td[i];
    total += diff * diff;
  }
  const S norm =
      reduction == Reduction::kMean ? S(1) / S(std::max<std::size_t>(pd.size(), 1))
                                    : S(1);
  auto pn = pred.node(), tn = target.node();
  return make_result<S>({}, { total * norm }, { pn, tn },
                        [pn, tn, norm](Node<S> &self) {
                          const S g = S(2) * norm * self.grad[0];
                          const std::size_t count = pn->value.size();
                          if (pn->requires_grad) {
                            auto &gp = pn->grad_buffer();
                            for (std::size_t i = 0; i < count; ++i)
                              gp[i] += g * (pn->value[i] - tn->value[i]);
                          }
                          if (tn->requires_grad) {
                            auto &gt = tn->grad_buffer();
                            for (std::size_t i = 0; i < count; ++i)
                              gt[i] -= g * (pn->value[i] - tn->value[i]);
                          }
                        });
}

template <class S>
Tensor<S> cross_entropy(const Tensor<S> &logits,
                        const std::vector<std::int32_t> &targets,
                        Reduction reduction) {
  const std::int64_t v = logits.dim(-1);
  const std::int64_t rows = logits.numel() / v;
  if (static_cast<std::int64_t>(targets.size()) != rows)
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size())
                        + " targets for " + std::to_string(rows) + " rows");
  std::vector<S> probs(logits.numel());
  auto ld = logits.data();
  S total = 0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || targets[r] >= v)
      throw IdOutOfRange("cross_entropy target " + std::to_string(targets[r])
                         + " outside " + std::to_string(v) + " classes");
    const S *row = ld.data() + r * v;
    S mx = *std::max_element(row, row + v);
    S z = 0;
    for (std::int64_t j = 0; j < v; ++j) {
      probs[r * v + j] = std::exp(row[j] - mx);
      z += probs[r * v + j];
    }
    for (std::int64_t j = 0; j < v; ++j)
      probs[r * v + j] /= z;
    total += mx + std::log(z) - row[targets[r]];
  }
  const S norm = reduction == Reduction::kMean
                     ? S(1) / S(std::max<std::int64_t>(rows, 1))
                     : S(1);
  auto ln = logits.node();
  return make_result<S>(
      {}, { total * norm }, { ln },
      [ln, targets, probs = std::move(probs), rows, v, norm](Node<S> &self) {
        auto &g = ln->grad_buffer();
        const S s = norm * self.grad[0];
        for (std::int64_t r = 0; r < rows; ++r) {
          for (std::int64_t j = 0; j < v; ++j)
            g[r * v + j] += s * probs[r * v + j];
          g[r * v + targets[r]] -= s;
        }
      });
}

template <class S>
Tensor<S> neg_sq_distance(const Tensor<S> &x, const Tensor<S> &table) {
  const std::int64_t d = x.dim(-1);
  if (table.rank() != 2 || table.dim(1) != d)
    throw ShapeMismatch("neg_sq_distance: table " + shape_str(table.shape())
                        + " incompatible with " + shape_str(x.shape()));
  const std::int64_t v = table.dim(0);
  const std::int64_t rows = x.numel() / d;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(v);
  std::vector<S> out(rows * v);
  auto xd = x.data(), td = table.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S *xr = xd.data() + r * d;
    for (std::int64_t w = 0; w < v; ++w) {
      const S *tw = td.data() + w * d;
      S acc = 0;
      for (std::int64_t j = 0; j < d; ++j) {
        S diff = xr[j] - tw[j];
        acc += diff * diff;
      }
      out[r * v + w] = -acc;
    }
  }
  auto xn = x.node(), tn = table.node();
  return make_result<S>(
      std::move(out_shape), std::move(out), { xn, tn },
      [xn, tn, rows, v, d](Node<S> &self) {
        S *gx = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
        S *gt = tn->requires_grad ? tn->grad_buffer().data() : nullptr;
        for (std::int64_t r = 0; r < rows; ++r) {
          const S *xr = xn->value.data() + r * d;
          for (std::int64_t w = 0; w < v; ++w) {
            const S g = self.grad[r * v + w];
            if (g == S(0))
              continue;
            const S *tw = tn->value.data() + w * d;
            for (std::int64_t j = 0; j < d; ++j) {
              S diff = S(2) * g * (xr[j] - tw[j]);
              if (gx)
                gx[r * d + j] -= diff;
              if (gt)
                gt[w * d + j] += diff;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Instantiations

#define SMIDIFF_INSTANTIATE(S)                                                \
  template class Tensor<S>;                                                   \
  template Tensor<S> matmul(const Tensor<S> &, const Tensor<S> &, bool,       \
                            bool);                                            \
  template Tensor<S> add(const Tensor<S> &, const Tensor<S> &);               \
  template Tensor<S> scale(const Tensor<S> &, S);                             \
  template Tensor<S> softmax(const Tensor<S> &, int);                         \
  template Tensor<S> masked_softmax(const Tensor<S> &,                        \
                                    const std::vector<std::uint8_t> &);       \
  template Tensor<S> layer_norm(const Tensor<S> &, const Tensor<S> &,         \
                                const Tensor<S> &, S);                        \
  template Tensor<S> gelu(const Tensor<S> &);                                 \
  template Tensor<S> embedding(const Tensor<S> &,                             \
                               const std::vector<std::int32_t> &,             \
                               const Shape &);                                \
  template Tensor<S> concat(const std::vector<Tensor<S>> &, int);             \
  template Tensor<S> slice(const Tensor<S> &, int, std::int64_t,              \
                           std::int64_t);                                     \
  template Tensor<S> transpose(const Tensor<S> &, int, int);                  \
  template Tensor<S> reshape(const Tensor<S> &, Shape);                       \
  template Tensor<S> repeat_rows(const Tensor<S> &, std::int64_t);            \
  template Tensor<S> sum(const Tensor<S> &);                                  \
  template Tensor<S> mse_loss(const Tensor<S> &, const Tensor<S> &,           \
                              Reduction);                                     \
  template Tensor<S> cross_entropy(const Tensor<S> &,                         \
                                   const std::vector<std::int32_t> &,         \
                                   Reduction);                                \
  template Tensor<S> neg_sq_distance(const Tensor<S> &, const Tensor<S> &);

SMIDIFF_INSTANTIATE(float)
SMIDIFF_INSTANTIATE(double)

#undef SMIDIFF_INSTANTIATE

}  // namespace smidiff
