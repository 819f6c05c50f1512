//
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "smidiff/diffusion.hpp"
#include "smidiff/errors.hpp"

using namespace smidiff;

namespace {

// Product of the Gaussian prior q(x_{t-1} | x_0) and the one-step
// likelihood q(x_t | x_{t-1}), normalised: returns the weights of x_0 and
// x_t in the posterior mean and its variance.
PosteriorCoefficients bayes_posterior(double ab_prev, double alpha) {
  const double beta = 1.0 - alpha;
  const double prior_var = 1.0 - ab_prev;
  if (prior_var <= 0.0)
    return { 1.0, 0.0, 0.0 };  // x_{t-1} = x_0 exactly
  const double precision = 1.0 / prior_var + alpha / beta;
  const double var = 1.0 / precision;
  return { var * std::sqrt(ab_prev) / prior_var, var * std::sqrt(alpha) / beta,
           var };
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({ std::abs(a), std::abs(b), 1e-300 });
}

}  // namespace

TEST(Schedule, SqrtShape) {
  auto s = build_schedule(2000);
  ASSERT_EQ(s.steps(), 2000);
  EXPECT_EQ(s.alpha_bar[0], 1.0);
  EXPECT_EQ(s.beta[0], 0.0);
  EXPECT_NEAR(s.alpha_bar[1], 1.0 - std::sqrt(1e-4), 1e-12);
  EXPECT_NEAR(s.alpha_bar[400], 1.0 - std::sqrt(399.0 / 2000 + 1e-4), 1e-9);
  for (int t = 1; t <= 2000; ++t) {
    EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]);
    EXPECT_GT(s.alpha_bar[t], 0.0);
    EXPECT_NEAR(s.alpha[t], 1.0 - s.beta[t], 1e-15);
  }
  auto lin = build_schedule(1000, ScheduleKind::kLinear);
  EXPECT_NEAR(lin.beta[1], 1e-4, 1e-15);
  EXPECT_NEAR(lin.beta[1000], 0.02, 1e-15);
  EXPECT_THROW(build_schedule(1), InvalidArgument);
}

TEST(Schedule, RespaceKeepsEndpointsAndAlphaBar) {
  auto s = build_schedule(2000);
  auto r = respace(s, 200);
  ASSERT_EQ(r.steps(), 200);
  EXPECT_EQ(r.timesteps[1], 1);
  EXPECT_EQ(r.timesteps[200], 2000);
  for (int i = 1; i <= 200; ++i) {
    EXPECT_GT(r.timesteps[i], r.timesteps[i - 1]);
    EXPECT_DOUBLE_EQ(r.alpha_bar[i], s.alpha_bar[r.timesteps[i]]);
    EXPECT_NEAR(r.alpha_bar[i], r.alpha_bar[i - 1] * r.alpha[i], 1e-15);
  }
  auto sub = respace_range(s, 20, 400);
  EXPECT_EQ(sub.timesteps[1], 1);
  EXPECT_EQ(sub.timesteps[20], 400);
  EXPECT_EQ(respace_range(s, 1, 400).timesteps[1], 400);
  EXPECT_THROW(respace(s, 1), InvalidArgument);
  EXPECT_THROW(respace(s, 2001), InvalidArgument);
  EXPECT_THROW(respace_range(s, 5, 2001), InvalidArgument);
}

TEST(Posterior, MatchesBayesRule) {
  for (int T: { 10, 100, 2000 }) {
    for (auto kind: { ScheduleKind::kSqrt, ScheduleKind::kLinear }) {
      auto s = build_schedule(T, kind);
      for (auto sched: { s, respace(s, std::max(2, T / 10)) }) {
        for (int t = 1; t <= sched.steps(); ++t) {
          auto got = posterior_coefficients(sched, t);
          auto want = bayes_posterior(sched.alpha_bar[t - 1], sched.alpha[t]);
          EXPECT_LT(rel(got.c0, want.c0), 1e-10) << T << " t=" << t;
          EXPECT_LT(rel(got.ct, want.ct), 1e-10) << T << " t=" << t;
          if (want.variance == 0.0)
            EXPECT_EQ(got.variance, 0.0);
          else
            EXPECT_LT(rel(got.variance, want.variance), 1e-10);
        }
      }
    }
  }
  auto s = build_schedule(10);
  EXPECT_THROW(posterior_coefficients(s, 0), StepOutOfRange);
  EXPECT_THROW(posterior_coefficients(s, 11), StepOutOfRange);
}

TEST(Posterior, StepUsesCoefficients) {
  auto s = build_schedule(50);
  StateMatrix x{ 2, 3, 10, { 1, 2, 3, 4, 5, 6 } };
  std::vector<float> x0hat = { 0.5f, -1, 2, 0, 1, -2 };
  auto c = posterior_coefficients(s, 1);
  Rng rng(1);
  auto y = posterior_step(x, x0hat, 1, s, rng);
  for (int i = 0; i < 6; ++i)
    EXPECT_NEAR(y.data[i], c.c0 * x0hat[i] + c.ct * x.data[i], 1e-6);
  EXPECT_EQ(y.t, 0);
}

TEST(ForwardProcess, QSampleMoments) {
  auto s = build_schedule(2000);
  StateMatrix x0{ 1, 1, 0, { 1.7f } };
  Rng rng(3);
  for (int t: { 1, 50, 400, 1500, 2000 }) {
    const int draws = 20000;
    double sum = 0, sq = 0;
    for (int i = 0; i < draws; ++i) {
      double v = q_sample(x0, t, s, rng).data[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / draws, var = sq / draws - mean * mean;
    const double want_mean = std::sqrt(s.alpha_bar[t]) * 1.7;
    const double want_var = 1.0 - s.alpha_bar[t];
    EXPECT_NEAR(mean, want_mean, 4 * std::sqrt(want_var / draws)) << t;
    EXPECT_NEAR(var, want_var, 4 * want_var * std::sqrt(2.0 / draws)) << t;
  }
}

TEST(Rounding, NearestEmbeddingLowestIdOnTies) {
  EmbeddingConfig cfg;
  // Rows 4 and 5 are identical: ties must resolve to 4.
  cfg.table = Tensor<float>::from_data(
      { 6, 2 }, { 0, 0, 10, 0, 0, 10, -10, 0, 5, 5, 5, 5 });
  std::vector<float> cols = { 0.1f, 0.1f, 4.9f, 5.2f, 9.0f, 0.0f, -9.0f, 1.0f };
  auto r = round_columns(cols, 4, cfg);
  EXPECT_EQ(r.raw_argmax, (std::vector<TokenId>{ 0, 4, 1, 3 }));
  EXPECT_EQ(r.sequence.ids(), (std::vector<TokenId>{ kSos, 4, kEos, kPad }));
  for (int i = 0; i < 4; ++i) {
    double z = 0;
    for (int w = 0; w < 6; ++w)
      z += std::exp(r.log_probs[i * 6 + w]);
    EXPECT_NEAR(z, 1.0, 1e-9);
  }
}

TEST(Rounding, CoerceLayout) {
  auto seq = coerce_layout(std::vector<TokenId>{ 7, 5, kPad, 6, kEos, 5, kSos });
  EXPECT_EQ(seq.ids(),
            (std::vector<TokenId>{ kSos, 5, 6, kEos, kPad, kPad, kPad }));
  auto none = coerce_layout(std::vector<TokenId>{ kSos, 5, 5, 5 });
  EXPECT_EQ(none.ids(), (std::vector<TokenId>{ kSos, 5, 5, kEos }));
  EXPECT_TRUE(is_well_formed(none.ids()));
}

TEST(Embedding, EmbedAndClamp) {
  EmbeddingConfig cfg;
  cfg.table = Tensor<float>::from_data({ 5, 2 }, { 0, 0, 1, 1, 2, 2, 3, 3, 4, 4 });
  cfg.sigma0 = 0.0;
  auto seq = TokenSequence::from_payload(std::vector<TokenId>{ 4 }, 4);
  Rng rng(2);
  auto x = embed_sequence(seq, cfg, rng);
  EXPECT_EQ(x.data, (std::vector<float>{ 0, 0, 4, 4, 1, 1, 2, 2 }));
  std::vector<float> cols = { 0.4f, 0.3f, 3.6f, 3.7f };
  clamp_to_embeddings(cols, cfg);
  EXPECT_EQ(cols, (std::vector<float>{ 0, 0, 4, 4 }));
}

TEST(Schedule, CsvDump) {
  std::ostringstream os;
  write_schedule_csv(os, build_schedule(4));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,beta,alpha_bar");
  int rows = 0;
  while (std::getline(is, line))
    ++rows;
  EXPECT_EQ(rows, 5);
}
