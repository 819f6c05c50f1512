//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_GENERATOR_HPP_
#define SMIDIFF_GENERATOR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smidiff/denoiser.hpp"
#include "smidiff/diffusion.hpp"
#include "smidiff/smiles_graph.hpp"
#include "smidiff/text.hpp"

namespace smidiff {

struct SamplerConfig {
  int steps1 = 200;  // S1
  int steps2 = 20;   // S2
  int renoise = 400; // B
  int max_rounds = 1;
  bool clamp = false;
  std::uint64_t seed = 0;

  // Throws InvalidArgument; `tau` bounds B.
  void check(int total_steps, int tau) const;
};

// Everything the sampler needs besides the network weights.
struct SamplerContext {
  const Vocabulary *vocab = nullptr;
  const TextVocabulary *text_vocab = nullptr;
  NoiseSchedule schedule;  // full T-step schedule
  int tau = 400;
};

struct GenerationResult {
  std::string smiles;
  TokenSequence sequence;
  bool valid = false;
  bool corrected = false;
  std::string phase1_smiles;
  ValidityReport diagnostics;
  int rounds = 0;  // correction passes actually run
};

// Phase one for a batch of encoded descriptions. Example i draws from
// stream `rngs[i]` only, so results do not depend on batch composition.
std::vector<RoundingResult> phase_one_sample(
    const Denoiser<float> &f1, std::span<const std::vector<std::int32_t>> words,
    const SamplerContext &ctx, const SamplerConfig &cfg,
    std::span<Rng> rngs);

// Re-noises Emb(tokens) to step B and runs S2 text-free steps over (0, B].
std::vector<RoundingResult> phase_two_correct(
    const Denoiser<float> &f2, std::span<const TokenSequence> sequences,
    const SamplerContext &ctx, const SamplerConfig &cfg,
    std::span<Rng> rngs);

// Full pipeline. `f2` may be null only when max_rounds is 0; throws
// ModelNotLoaded otherwise, and EmptyText for blank descriptions.
std::vector<GenerationResult> generate_batch(
    const Denoiser<float> *f1, const Denoiser<float> *f2,
    std::span<const std::string> descriptions, const SamplerContext &ctx,
    const SamplerConfig &cfg, std::size_t first_index = 0);

GenerationResult generate(const Denoiser<float> *f1, const Denoiser<float> *f2,
                          const std::string &description,
                          const SamplerContext &ctx, const SamplerConfig &cfg);

// Correction only: runs the gate and up to max_rounds phase-two passes on
// existing sequences (used to measure repair of corrupted molecules).
std::vector<GenerationResult> correct_batch(
    const Denoiser<float> &f2, std::span<const TokenSequence> sequences,
    const SamplerContext &ctx, const SamplerConfig &cfg,
    std::size_t first_index = 0);

// Stream for example `index` of a run seeded with `seed`.
Rng example_rng(std::uint64_t seed, std::size_t index);

}  // namespace smidiff

#endif  // SMIDIFF_GENERATOR_HPP_
