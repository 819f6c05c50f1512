//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "smidiff/errors.hpp"

namespace smidiff {

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kSqrt ? "sqrt" : "linear";
}

ScheduleKind schedule_kind_from_string(std::string_view name) {
  if (name == "sqrt")
    return ScheduleKind::kSqrt;
  if (name == "linear")
    return ScheduleKind::kLinear;
  throw InvalidArgument("unknown schedule kind '" + std::string(name) + "'");
}

namespace {

constexpr double kMinBeta = 1e-8;
constexpr double kMaxBeta = 0.999;

void fill_from_betas(NoiseSchedule &s) {
  const int steps = static_cast<int>(s.beta.size()) - 1;
  s.alpha.assign(steps + 1, 1.0);
  s.alpha_bar.assign(steps + 1, 1.0);
  for (int t = 1; t <= steps; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
}

}  // namespace

NoiseSchedule build_schedule(int total_steps, ScheduleKind kind) {
  if (total_steps < 2)
    throw InvalidArgument("schedule needs T >= 2, got "
                          + std::to_string(total_steps));
  NoiseSchedule s;
  s.kind = kind;
  s.total_steps = total_steps;
  s.timesteps.resize(total_steps + 1);
  for (int t = 0; t <= total_steps; ++t)
    s.timesteps[t] = t;
  s.beta.assign(total_steps + 1, 0.0);

  const double T = total_steps;
  if (kind == ScheduleKind::kSqrt) {
    auto target = [&](int t) {
      return t == 0 ? 1.0
                    : 1.0 - std::sqrt((t - 1) / T + kSqrtScheduleOffset);
    };
    for (int t = 1; t <= total_steps; ++t)
      s.beta[t] = std::clamp(1.0 - target(t) / target(t - 1), kMinBeta,
                             kMaxBeta);
  } else {
    // DDPM linear betas rescaled so the endpoints match a 1000-step chain.
    const double factor = 1000.0 / T;
    const double lo = 1e-4 * factor, hi = 0.02 * factor;
    for (int t = 1; t <= total_steps; ++t)
      s.beta[t] = std::clamp(lo + (hi - lo) * (t - 1) / (T - 1), kMinBeta,
                             kMaxBeta);
  }
  fill_from_betas(s);
  return s;
}

NoiseSchedule respace_range(const NoiseSchedule &sched, int count,
                            int upper) {
  if (upper < 1 || upper > sched.steps())
    throw InvalidArgument("respace upper bound " + std::to_string(upper)
                          + " outside [1, " + std::to_string(sched.steps())
                          + "]");
  if (count < 1 || count > upper)
    throw InvalidArgument("respace count " + std::to_string(count)
                          + " outside [1, " + std::to_string(upper) + "]");
  std::vector<int> picked;
  if (count == 1) {
    picked.push_back(upper);
  } else {
    for (int i = 0; i < count; ++i)
      picked.push_back(static_cast<int>(
          std::lround(1.0 + i * static_cast<double>(upper - 1) / (count - 1))));
  }

  NoiseSchedule out;
  out.kind = sched.kind;
  out.total_steps = sched.total_steps;
  out.timesteps = { 0 };
  out.alpha_bar = { 1.0 };
  for (int idx: picked) {
    out.timesteps.push_back(sched.timesteps[idx]);
    out.alpha_bar.push_back(sched.alpha_bar[idx]);
  }
  out.beta.assign(out.alpha_bar.size(), 0.0);
  out.alpha.assign(out.alpha_bar.size(), 1.0);
  for (std::size_t i = 1; i < out.alpha_bar.size(); ++i) {
    out.beta[i] = 1.0 - out.alpha_bar[i] / out.alpha_bar[i - 1];
    out.alpha[i] = 1.0 - out.beta[i];
  }
  return out;
}

NoiseSchedule respace(const NoiseSchedule &sched, int count) {
  if (count < 2 || count > sched.steps())
    throw InvalidArgument("respace step count " + std::to_string(count)
                          + " outside [2, " + std::to_string(sched.steps())
                          + "]");
  return respace_range(sched, count, sched.steps());
}

void write_schedule_csv(std::ostream &os, const NoiseSchedule &sched) {
  auto old = os.precision(17);
  os << "t,beta,alpha_bar\n";
  for (int i = 0; i <= sched.steps(); ++i)
    os << sched.timesteps[i] << ',' << sched.beta[i] << ','
       << sched.alpha_bar[i] << '\n';
  os.precision(old);
}

PosteriorCoefficients posterior_coefficients(const NoiseSchedule &sched,
                                             int index) {
  if (index < 1 || index > sched.steps())
    throw StepOutOfRange("step index " + std::to_string(index)
                         + " outside [1, " + std::to_string(sched.steps())
                         + "]");
  const double ab_t = sched.alpha_bar[index];
  const double ab_prev = sched.alpha_bar[index - 1];
  const double beta = sched.beta[index];
  const double alpha = sched.alpha[index];
  const double denom = 1.0 - ab_t;
  return {
    std::sqrt(ab_prev) * beta / denom,
    std::sqrt(alpha) * (1.0 - ab_prev) / denom,
    (1.0 - ab_prev) * beta / denom,
  };
}

StateMatrix embed_sequence(const TokenSequence &seq,
                           const EmbeddingConfig &cfg, Rng &rng) {
  const int d = cfg.dim();
  const int vocab = cfg.vocab_size();
  StateMatrix x;
  x.d = d;
  x.n = seq.length();
  x.t = 0;
  x.data.resize(static_cast<std::size_t>(x.n) * d);
  auto table = cfg.table.data();
  for (int i = 0; i < x.n; ++i) {
    TokenId id = seq.ids()[i];
    if (id < 0 || id >= vocab)
      throw IdOutOfRange("token id " + std::to_string(id)
                         + " outside embedding table of "
                         + std::to_string(vocab));
    for (int k = 0; k < d; ++k)
      x.data[i * d + k] = table[id * d + k];
  }
  if (cfg.sigma0 > 0.0)
    for (auto &v: x.data)
      v += static_cast<float>(cfg.sigma0 * rng.normal());
  return x;
}

StateMatrix q_sample(const StateMatrix &x0, int index,
                     const NoiseSchedule &sched, Rng &rng) {
  if (index < 1 || index > sched.steps())
    throw StepOutOfRange("step index " + std::to_string(index)
                         + " outside [1, " + std::to_string(sched.steps())
                         + "]");
  const double ab = sched.alpha_bar[index];
  const double signal = std::sqrt(ab), noise = std::sqrt(1.0 - ab);
  StateMatrix xt = x0;
  xt.t = sched.timesteps[index];
  for (auto &v: xt.data)
    v = static_cast<float>(signal * v + noise * rng.normal());
  return xt;
}

void posterior_step_inplace(std::span<float> xt, std::span<const float> x0hat,
                            int index, const NoiseSchedule &sched, Rng &rng) {
  if (xt.size() != x0hat.size())
    throw ShapeMismatch("posterior_step: x_t and x0 prediction sizes differ");
  const PosteriorCoefficients c = posterior_coefficients(sched, index);
  const double sd = std::sqrt(c.variance);
  for (std::size_t i = 0; i < xt.size(); ++i) {
    double mean = c.c0 * x0hat[i] + c.ct * xt[i];
    xt[i] = static_cast<float>(sd > 0.0 ? mean + sd * rng.normal() : mean);
  }
}

StateMatrix posterior_step(const StateMatrix &xt,
                           std::span<const float> x0hat, int index,
                           const NoiseSchedule &sched, Rng &rng) {
  StateMatrix out = xt;
  posterior_step_inplace(out.data, x0hat, index, sched, rng);
  out.t = sched.timesteps[index - 1];
  return out;
}

TokenSequence coerce_layout(std::span<const TokenId> raw) {
  const int n = static_cast<int>(raw.size());
  std::vector<TokenId> payload;
  for (int i = 1; i < n; ++i) {
    if (raw[i] == kEos)
      break;
    if (raw[i] == kSos || raw[i] == kPad)
      continue;
    payload.push_back(raw[i]);
  }
  if (static_cast<int>(payload.size()) > n - 2)
    payload.resize(n - 2);
  return TokenSequence::from_payload(payload, n);
}

RoundingResult round_columns(std::span<const float> columns, int n,
                             const EmbeddingConfig &cfg) {
  const int d = cfg.dim();
  const int vocab = cfg.vocab_size();
  if (columns.size() != static_cast<std::size_t>(n) * d)
    throw ShapeMismatch("round_columns: expected " + std::to_string(n * d)
                        + " values, got " + std::to_string(columns.size()));
  auto table = cfg.table.data();
  RoundingResult r;
  r.raw_argmax.resize(n);
  r.log_probs.resize(static_cast<std::size_t>(n) * vocab);
  std::vector<double> logits(vocab);
  for (int i = 0; i < n; ++i) {
    const float *x = columns.data() + static_cast<std::size_t>(i) * d;
    int best = 0;
    for (int w = 0; w < vocab; ++w) {
      double acc = 0;
      for (int k = 0; k < d; ++k) {
        double diff = static_cast<double>(x[k]) - table[w * d + k];
        acc += diff * diff;
      }
      logits[w] = -acc;
      if (logits[w] > logits[best])
        best = w;
    }
    r.raw_argmax[i] = best;
    double z = 0;
    for (int w = 0; w < vocab; ++w)
      z += std::exp(logits[w] - logits[best]);
    const double lse = logits[best] + std::log(z);
    for (int w = 0; w < vocab; ++w)
      r.log_probs[static_cast<std::size_t>(i) * vocab + w] =
          static_cast<float>(logits[w] - lse);
  }
  r.sequence = coerce_layout(r.raw_argmax);
  return r;
}

RoundingResult round_to_tokens(const StateMatrix &x0,
                               const EmbeddingConfig &cfg) {
  if (x0.d != cfg.dim())
    throw ShapeMismatch("state dimension " + std::to_string(x0.d)
                        + " differs from embedding dimension "
                        + std::to_string(cfg.dim()));
  return round_columns(x0.data, x0.n, cfg);
}

void clamp_to_embeddings(std::span<float> columns,
                         const EmbeddingConfig &cfg) {
  const int d = cfg.dim();
  const int n = static_cast<int>(columns.size()) / d;
  auto r = round_columns(columns, n, cfg);
  auto table = cfg.table.data();
  for (int i = 0; i < n; ++i)
    std::copy_n(table.begin() + r.raw_argmax[i] * d, d,
                columns.begin() + static_cast<std::size_t>(i) * d);
}

}  // namespace smidiff
