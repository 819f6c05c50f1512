//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_ADAM_HPP_
#define SMIDIFF_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "smidiff/tensor.hpp"

namespace smidiff {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t warmup_steps = 0;
};

// lr * min(1, step / warmup); step counts from 1.
double warmup_lr(const AdamConfig &config, std::int64_t step);

template <class S>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<S>> first_moment;
  std::vector<std::vector<S>> second_moment;
};

template <class S>
AdamState<S> make_adam_state(std::span<const Tensor<S>> params,
                             AdamConfig config);

// One bias-corrected Adam update over raw buffers, using `step` (>= 1) for
// bias correction and `lr` as the effective learning rate.
template <class S>
void adam_update(std::span<S> param, std::span<const S> grad,
                 std::span<S> first, std::span<S> second, std::int64_t step,
                 double lr, const AdamConfig &config);

// Advances the step counter and updates every parameter from its gradient.
// Parameters without a gradient buffer are treated as having zero gradient.
template <class S>
void adam_step(std::span<Tensor<S>> params, AdamState<S> &state);

}  // namespace smidiff

#endif  // SMIDIFF_ADAM_HPP_
