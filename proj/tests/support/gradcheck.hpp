//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_TESTS_GRADCHECK_HPP_
#define SMIDIFF_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "smidiff/tensor.hpp"

namespace smidiff::testing {

inline constexpr double kAbsFloor = 1e-6;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;        // name of the worst tensor
  double analytic_norm = 0.0;
};

// Central differences against reverse mode, per tensor:
// ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||) over up to
// `samples` entries of each tensor. `loss` must rebuild the graph on every
// call from the current parameter values.
inline GradCheckResult grad_check(
    const std::function<Tensor<double>()> &loss,
    const std::vector<std::pair<std::string, Tensor<double>>> &params,
    double h = 1e-4, std::size_t samples = 16) {
  for (const auto &[name, p]: params)
    const_cast<Tensor<double> &>(p).zero_grad();
  const Tensor<double> base = loss();
  base.backward();
  // Smallest gradient a central difference can resolve at this loss scale.
  const double resolution =
      std::numeric_limits<double>::epsilon() * std::abs(base.item()) / h;
  const double floor = std::max(kAbsFloor, 1e5 * resolution);

  GradCheckResult out;
  double total_sq = 0.0;
  for (const auto &[name, p_const]: params) {
    auto &p = const_cast<Tensor<double> &>(p_const);
    const auto numel = static_cast<std::size_t>(p.numel());
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    if (analytic.empty())
      analytic.assign(numel, 0.0);
    const std::size_t stride = std::max<std::size_t>(1, numel / samples);
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (std::size_t i = 0; i < numel; i += stride) {
      auto data = p.mutable_data();
      const double orig = data[i];
      double plus, minus;
      {
        NoGradGuard guard;
        data[i] = orig + h;
        plus = loss().item();
        data[i] = orig - h;
        minus = loss().item();
        data[i] = orig;
      }
      const double numeric = (plus - minus) / (2.0 * h);
      diff_sq += (numeric - analytic[i]) * (numeric - analytic[i]);
      a_sq += analytic[i] * analytic[i];
      n_sq += numeric * numeric;
    }
    total_sq += a_sq;
    // Some gradients vanish identically (an attention key bias shifts every
    // score of a query equally); there only round-off is left to compare,
    // so the denominator is floored well above the probe's resolution.
    const double denom = std::max(std::sqrt(std::max(a_sq, n_sq)), floor);
    const double rel = std::sqrt(diff_sq) / denom;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = name;
    }
  }
  out.analytic_norm = std::sqrt(total_sq);
  return out;
}

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed,
                                    double scale = 1.0,
                                    bool requires_grad = true) {
  std::vector<double> data(shape_numel(shape));
  std::uint64_t s = seed * 0x9e3779b97f4a7c15ULL + 1;
  for (auto &v: data) {
    // Irwin-Hall approximation of a normal draw; deterministic and portable.
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
      s ^= s << 13;
      s ^= s >> 7;
      s ^= s << 17;
      acc += static_cast<double>(s >> 11) / 9007199254740992.0;
    }
    v = scale * (acc - 2.0) * std::sqrt(3.0);
  }
  return Tensor<double>::from_data(std::move(shape), std::move(data),
                                   requires_grad);
}

}  // namespace smidiff::testing

#endif  // SMIDIFF_TESTS_GRADCHECK_HPP_
