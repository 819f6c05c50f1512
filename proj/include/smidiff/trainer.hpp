//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_TRAINER_HPP_
#define SMIDIFF_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smidiff/adam.hpp"
#include "smidiff/dataset.hpp"
#include "smidiff/denoiser.hpp"
#include "smidiff/diffusion.hpp"
#include "smidiff/smiles_graph.hpp"
#include "smidiff/text.hpp"

namespace smidiff {

enum class TrainPhase { kOne, kTwo };

std::string_view to_string(TrainPhase phase);
TrainPhase train_phase_from_string(std::string_view name);

struct TrainConfig {
  int total_steps = 2000;  // T
  int tau = 400;           // phase two corrects below this step
  ScheduleKind schedule = ScheduleKind::kSqrt;
  double sigma0 = 0.1;
  CorruptParams corruption;
  AdamConfig adam;
  int batch_size = 16;
  std::int64_t max_steps = 2000;
  TrainPhase phase = TrainPhase::kOne;
  std::uint64_t seed = 0;
  // One model trained with objective two and used for both phases.
  bool joint = false;
  int log_every = 10;
  std::int64_t checkpoint_every = 0;  // 0 = final only

  // Throws InvalidArgument.
  void check() const;
};

struct TrainExample {
  TokenSequence sequence;
  std::vector<std::int32_t> words;
};

// Throws DataError naming the offending record.
std::vector<TrainExample> prepare_examples(
    std::span<const DatasetRecord> records, const Vocabulary &vocab,
    const TextVocabulary &text_vocab, int n, int max_text_len);

enum class LossBranch {
  kRounding,   // t = 0: rounding negative log-likelihood
  kDenoise,    // MSE of the x0 prediction, with text
  kCorrected,  // phase two, t < tau: corrupted input, no text
};

template <class S>
struct LossTerms {
  Tensor<S> loss;  // mean over the batch of per-example sums
  std::vector<int> timesteps;
  std::vector<LossBranch> branches;
  std::vector<double> per_example;
};

// One stochastic estimate of the objective for `phase`. `forced_t`, when
// non-empty, replaces the uniform draw of t (one entry per example).
template <class S>
LossTerms<S> compute_loss(const Denoiser<S> &model,
                          std::span<const TrainExample> batch,
                          const NoiseSchedule &sched, const TrainConfig &cfg,
                          TrainPhase phase, const Vocabulary &vocab, Rng &rng,
                          std::span<const int> forced_t = {});

template <class S>
LossTerms<S> loss_objective1(const Denoiser<S> &model,
                             std::span<const TrainExample> batch,
                             const NoiseSchedule &sched,
                             const TrainConfig &cfg, const Vocabulary &vocab,
                             Rng &rng, std::span<const int> forced_t = {}) {
  return compute_loss(model, batch, sched, cfg, TrainPhase::kOne, vocab, rng,
                      forced_t);
}

template <class S>
LossTerms<S> loss_objective2(const Denoiser<S> &model,
                             std::span<const TrainExample> batch,
                             const NoiseSchedule &sched,
                             const TrainConfig &cfg, const Vocabulary &vocab,
                             Rng &rng, std::span<const int> forced_t = {}) {
  return compute_loss(model, batch, sched, cfg, TrainPhase::kTwo, vocab, rng,
                      forced_t);
}

struct TrainStepLog {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  // Mean per-example loss of each branch in the batch; count 0 = absent.
  double denoise = 0.0;
  int denoise_count = 0;
  double rounding = 0.0;
  int rounding_count = 0;
  double corrected = 0.0;
  int corrected_count = 0;
};

struct TrainReport {
  std::vector<TrainStepLog> steps;

  // Mean loss over the first / last `window` steps.
  double head_loss(std::size_t window) const;
  double tail_loss(std::size_t window) const;
  // Same for the phase-two corrected branch, over steps where it occurred.
  double head_corrected(std::size_t window) const;
  double tail_corrected(std::size_t window) const;
};

void write_metrics_header(std::ostream &os);
void write_metrics_row(std::ostream &os, const TrainStepLog &row);

using CheckpointHook = std::function<void(std::int64_t step)>;

// Algorithm: sample a batch, draw t per example, branch, Adam step with
// linear warmup. Parameters of a frozen text encoder are not updated.
TrainReport train_loop(Denoiser<float> &model,
                       std::span<const TrainExample> data,
                       const Vocabulary &vocab, const TrainConfig &cfg,
                       std::ostream *metrics = nullptr,
                       const CheckpointHook &checkpoint = {});

}  // namespace smidiff

#endif  // SMIDIFF_TRAINER_HPP_
