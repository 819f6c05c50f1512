//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_DIFFUSION_HPP_
#define SMIDIFF_DIFFUSION_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smidiff/rng.hpp"
#include "smidiff/smiles_tok.hpp"
#include "smidiff/tensor.hpp"

namespace smidiff {

enum class ScheduleKind { kSqrt, kLinear };

std::string_view to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(std::string_view name);

// Offset of the sqrt schedule: alpha_bar(t) = 1 - sqrt((t - 1) / T + s).
inline constexpr double kSqrtScheduleOffset = 1e-4;

// Per-step tables indexed 0..steps(); entry 0 is the clean-data boundary
// (alpha_bar = 1, beta = 0). `timesteps[i]` is the original diffusion step
// that index i corresponds to, which differs from i after respacing.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kSqrt;
  int total_steps = 0;  // T of the underlying process
  std::vector<int> timesteps;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()) - 1; }
};

// Throws InvalidArgument when T < 2.
NoiseSchedule build_schedule(int total_steps,
                             ScheduleKind kind = ScheduleKind::kSqrt);

// S timesteps evenly spaced over [1, steps()] including both endpoints.
// Throws InvalidArgument unless 2 <= S <= steps().
NoiseSchedule respace(const NoiseSchedule &sched, int count);

// S timesteps evenly spaced over [1, upper]; 1 <= S <= upper <= steps().
// S = 1 keeps only `upper`.
NoiseSchedule respace_range(const NoiseSchedule &sched, int count, int upper);

// "t,beta,alpha_bar" rows for indices 0..steps().
void write_schedule_csv(std::ostream &os, const NoiseSchedule &sched);

struct PosteriorCoefficients {
  double c0;        // weight on the x0 prediction
  double ct;        // weight on x_t
  double variance;  // 0 at the final step
};

// Throws StepOutOfRange unless 1 <= index <= steps().
PosteriorCoefficients posterior_coefficients(const NoiseSchedule &sched,
                                             int index);

// Position-major d x n state: column i (the embedding of position i) is
// stored contiguously at data[i * d].
struct StateMatrix {
  int d = 0;
  int n = 0;
  int t = 0;
  std::vector<float> data;

  std::span<const float> column(int i) const {
    return std::span<const float>(data).subspan(static_cast<std::size_t>(i) * d,
                                                d);
  }
};

struct EmbeddingConfig {
  Tensor<float> table;  // (vocab, d)
  double sigma0 = 0.1;

  int vocab_size() const { return static_cast<int>(table.dim(0)); }
  int dim() const { return static_cast<int>(table.dim(1)); }
};

// x0 = Emb(seq) + sigma0 * eps.
StateMatrix embed_sequence(const TokenSequence &seq,
                           const EmbeddingConfig &cfg, Rng &rng);

// x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps, for schedule index t.
StateMatrix q_sample(const StateMatrix &x0, int index,
                     const NoiseSchedule &sched, Rng &rng);

// Draws x_{t-1} ~ N(c0 x0hat + ct xt, v I) in place of `xt`.
void posterior_step_inplace(std::span<float> xt, std::span<const float> x0hat,
                            int index, const NoiseSchedule &sched, Rng &rng);

StateMatrix posterior_step(const StateMatrix &xt,
                           std::span<const float> x0hat, int index,
                           const NoiseSchedule &sched, Rng &rng);

struct RoundingResult {
  TokenSequence sequence;             // coerced to the padded layout
  std::vector<TokenId> raw_argmax;    // one per position, before coercion
  std::vector<float> log_probs;       // n x vocab, row-major
};

// Nearest-embedding rounding. Logits are negative squared L2 distances;
// ties go to the lowest token id.
RoundingResult round_to_tokens(const StateMatrix &x0,
                               const EmbeddingConfig &cfg);
RoundingResult round_columns(std::span<const float> columns, int n,
                             const EmbeddingConfig &cfg);

// Turns raw argmax ids into a well-formed sequence: position 0 becomes
// [SOS], the first [EOS] ends the payload, stray [SOS]/[PAD] inside the
// payload are dropped and everything after is [PAD].
TokenSequence coerce_layout(std::span<const TokenId> raw);

// Replaces each column by its nearest embedding row.
void clamp_to_embeddings(std::span<float> columns,
                         const EmbeddingConfig &cfg);

}  // namespace smidiff

#endif  // SMIDIFF_DIFFUSION_HPP_
