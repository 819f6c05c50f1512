//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/adam.hpp"

#include <algorithm>
#include <cmath>

#include "smidiff/errors.hpp"

namespace smidiff {

double warmup_lr(const AdamConfig &config, std::int64_t step) {
  if (config.warmup_steps <= 0)
    return config.lr;
  return config.lr
         * std::min(1.0, static_cast<double>(step)
                             / static_cast<double>(config.warmup_steps));
}

template <class S>
AdamState<S> make_adam_state(std::span<const Tensor<S>> params,
                             AdamConfig config) {
  AdamState<S> state;
  state.config = config;
  for (const auto &p: params) {
    state.first_moment.emplace_back(p.numel(), S(0));
    state.second_moment.emplace_back(p.numel(), S(0));
  }
  return state;
}

template <class S>
void adam_update(std::span<S> param, std::span<const S> grad,
                 std::span<S> first, std::span<S> second, std::int64_t step,
                 double lr, const AdamConfig &config) {
  if (grad.size() != param.size() || first.size() != param.size()
      || second.size() != param.size())
    throw ShapeMismatch("adam_update: parameter, gradient and moment sizes "
                        "differ");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  const S b1 = static_cast<S>(config.beta1);
  const S b2 = static_cast<S>(config.beta2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const S g = grad[i];
    first[i] = b1 * first[i] + (S(1) - b1) * g;
    second[i] = b2 * second[i] + (S(1) - b2) * g * g;
    const double mhat = first[i] / c1;
    const double vhat = second[i] / c2;
    param[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + config.eps));
  }
}

template <class S>
void adam_step(std::span<Tensor<S>> params, AdamState<S> &state) {
  if (params.size() != state.first_moment.size())
    throw ShapeMismatch("adam_step: " + std::to_string(params.size())
                        + " parameters for state of "
                        + std::to_string(state.first_moment.size()));
  ++state.step;
  const double lr = warmup_lr(state.config, state.step);
  std::vector<S> zeros;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto &p = params[i];
    if (static_cast<std::int64_t>(state.first_moment[i].size()) != p.numel())
      throw ShapeMismatch("adam_step: moment shape differs for parameter "
                          + std::to_string(i));
    std::span<const S> grad = p.grad();
    if (grad.empty()) {
      zeros.assign(p.numel(), S(0));
      grad = zeros;
    }
    adam_update<S>(p.mutable_data(), grad, state.first_moment[i],
                   state.second_moment[i], state.step, lr, state.config);
  }
}

#define SMIDIFF_INSTANTIATE(S)                                                \
  template AdamState<S> make_adam_state(std::span<const Tensor<S>>,           \
                                        AdamConfig);                          \
  template void adam_update(std::span<S>, std::span<const S>, std::span<S>,   \
                            std::span<S>, std::int64_t, double,               \
                            const AdamConfig &);                              \
  template void adam_step(std::span<Tensor<S>>, AdamState<S> &);

SMIDIFF_INSTANTIATE(float)
SMIDIFF_INSTANTIATE(double)

#undef SMIDIFF_INSTANTIATE

}  // namespace smidiff
