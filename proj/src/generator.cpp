//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/generator.hpp"

#include <algorithm>
#include <cmath>

#include "smidiff/errors.hpp"

namespace smidiff {

namespace {

constexpr std::size_t kChunk = 64;

EmbeddingConfig rounding_config(const Denoiser<float> &f) {
  EmbeddingConfig cfg;
  cfg.table = f.embedding_table();
  return cfg;
}

// Runs the reverse chain in place over `x` (batch of n x d states) from
// index `start` down to 1 of `sched`.
void reverse_chain(const Denoiser<float> &f, std::vector<float> &x,
                   std::int64_t batch, const NoiseSchedule &sched, int start,
                   const TextBatch<float> *text, bool clamp,
                   std::span<Rng> rngs) {
  const auto &mc = f.config();
  const std::size_t row = static_cast<std::size_t>(mc.n) * mc.d;
  const EmbeddingConfig emb = rounding_config(f);
  NoGradGuard no_grad;
  for (int idx = start; idx >= 1; --idx) {
    std::vector<int> steps(batch, sched.timesteps[idx]);
    Tensor<float> xt = Tensor<float>::from_data({ batch, mc.n, mc.d }, x);
    Tensor<float> x0hat = f.predict(xt, steps, text);
    std::vector<float> pred(x0hat.data().begin(), x0hat.data().end());
    for (std::int64_t b = 0; b < batch; ++b) {
      std::span<float> xb(x.data() + b * row, row);
      std::span<float> pb(pred.data() + b * row, row);
      if (clamp)
        clamp_to_embeddings(pb, emb);
      posterior_step_inplace(xb, pb, idx, sched, rngs[b]);
    }
  }
}

std::vector<RoundingResult> round_all(const Denoiser<float> &f,
                                      const std::vector<float> &x,
                                      std::int64_t batch) {
  const auto &mc = f.config();
  const std::size_t row = static_cast<std::size_t>(mc.n) * mc.d;
  const EmbeddingConfig emb = rounding_config(f);
  std::vector<RoundingResult> out;
  out.reserve(batch);
  for (std::int64_t b = 0; b < batch; ++b)
    out.push_back(round_columns(
        std::span<const float>(x.data() + b * row, row), mc.n, emb));
  return out;
}

}  // namespace

void SamplerConfig::check(int total_steps, int tau) const {
  if (steps1 < 2 || steps1 > total_steps)
    throw InvalidArgument("steps1 must lie in [2, T]");
  if (renoise < 1 || renoise > tau)
    throw InvalidArgument("re-noise level B must satisfy 0 < B <= tau");
  if (steps2 < 1 || steps2 > renoise)
    throw InvalidArgument("steps2 must lie in [1, B]");
  if (max_rounds < 0)
    throw InvalidArgument("max_rounds must be non-negative");
}

Rng example_rng(std::uint64_t seed, std::size_t index) {
  return Rng(Rng::splitmix(seed) ^ Rng::splitmix(index + 1));
}

std::vector<RoundingResult> phase_one_sample(
    const Denoiser<float> &f1, std::span<const std::vector<std::int32_t>> words,
    const SamplerContext &ctx, const SamplerConfig &cfg,
    std::span<Rng> rngs) {
  if (rngs.size() != words.size())
    throw SizeMismatch("one random stream per description is required");
  if (words.empty())
    return {};
  const auto &mc = f1.config();
  const auto batch = static_cast<std::int64_t>(words.size());
  const std::size_t row = static_cast<std::size_t>(mc.n) * mc.d;
  const NoiseSchedule sched = respace(ctx.schedule, cfg.steps1);

  std::vector<float> x(batch * row);
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < row; ++k)
      x[b * row + k] = static_cast<float>(rngs[b].normal());

  TextBatch<float> text;
  {
    NoGradGuard no_grad;
    text = f1.encode_text(words);
  }
  reverse_chain(f1, x, batch, sched, sched.steps(), &text, cfg.clamp, rngs);
  return round_all(f1, x, batch);
}

std::vector<RoundingResult> phase_two_correct(
    const Denoiser<float> &f2, std::span<const TokenSequence> sequences,
    const SamplerContext &ctx, const SamplerConfig &cfg,
    std::span<Rng> rngs) {
  if (rngs.size() != sequences.size())
    throw SizeMismatch("one random stream per sequence is required");
  if (sequences.empty())
    return {};
  const auto &mc = f2.config();
  const auto batch = static_cast<std::int64_t>(sequences.size());
  const std::size_t row = static_cast<std::size_t>(mc.n) * mc.d;
  const NoiseSchedule sched =
      respace_range(ctx.schedule, cfg.steps2, cfg.renoise);
  const double ab = sched.alpha_bar[sched.steps()];
  const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);

  auto table = f2.embedding_table().data();
  std::vector<float> x(batch * row);
  for (std::int64_t b = 0; b < batch; ++b) {
    const auto &seq = sequences[b];
    if (seq.length() != mc.n)
      throw ShapeMismatch("sequence length differs from model n");
    for (int i = 0; i < mc.n; ++i) {
      const float *e = table.data() + static_cast<std::size_t>(seq.ids()[i]) * mc.d;
      for (int k = 0; k < mc.d; ++k)
        x[b * row + i * mc.d + k] =
            static_cast<float>(a * e[k] + s * rngs[b].normal());
    }
  }
  reverse_chain(f2, x, batch, sched, sched.steps(), nullptr, cfg.clamp, rngs);
  return round_all(f2, x, batch);
}

namespace {

GenerationResult make_result(const TokenSequence &seq, const Vocabulary &vocab) {
  GenerationResult r;
  r.sequence = seq;
  r.smiles = detokenize(seq, vocab);
  r.diagnostics = validate(seq, vocab);
  r.valid = r.diagnostics.valid;
  return r;
}

// Correction rounds over the invalid members of `results`.
void run_corrections(const Denoiser<float> &f2,
                     std::vector<GenerationResult> &results,
                     std::vector<Rng> &rngs, const SamplerContext &ctx,
                     const SamplerConfig &cfg) {
  for (int round = 0; round < cfg.max_rounds; ++round) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < results.size(); ++i)
      if (!results[i].valid)
        todo.push_back(i);
    if (todo.empty())
      return;
    for (std::size_t c = 0; c < todo.size(); c += kChunk) {
      const std::size_t end = std::min(todo.size(), c + kChunk);
      std::vector<TokenSequence> seqs;
      std::vector<Rng> chunk_rngs;
      for (std::size_t j = c; j < end; ++j) {
        seqs.push_back(results[todo[j]].sequence);
        chunk_rngs.push_back(rngs[todo[j]]);
      }
      auto rounded = phase_two_correct(f2, seqs, ctx, cfg, chunk_rngs);
      for (std::size_t j = c; j < end; ++j) {
        auto &r = results[todo[j]];
        rngs[todo[j]] = chunk_rngs[j - c];
        GenerationResult next = make_result(rounded[j - c].sequence, *ctx.vocab);
        next.phase1_smiles = r.phase1_smiles;
        next.corrected = true;
        next.rounds = r.rounds + 1;
        r = std::move(next);
      }
    }
  }
}

}  // namespace

std::vector<GenerationResult> generate_batch(
    const Denoiser<float> *f1, const Denoiser<float> *f2,
    std::span<const std::string> descriptions, const SamplerContext &ctx,
    const SamplerConfig &cfg, std::size_t first_index) {
  if (!f1)
    throw ModelNotLoaded("phase-one model is not loaded");
  if (!f2 && cfg.max_rounds > 0)
    throw ModelNotLoaded("phase-two model is not loaded");
  if (!ctx.vocab || !ctx.text_vocab)
    throw ModelNotLoaded("vocabularies are not loaded");
  cfg.check(ctx.schedule.steps(), ctx.tau);

  const int max_text = f1->config().max_text_len;
  std::vector<std::vector<std::int32_t>> words;
  words.reserve(descriptions.size());
  for (const auto &desc: descriptions)
    words.push_back(ctx.text_vocab->encode(desc, max_text));

  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < descriptions.size(); ++i)
    rngs.push_back(example_rng(cfg.seed, first_index + i));

  std::vector<GenerationResult> results;
  results.reserve(descriptions.size());
  for (std::size_t c = 0; c < words.size(); c += kChunk) {
    const std::size_t end = std::min(words.size(), c + kChunk);
    auto rounded = phase_one_sample(
        *f1, std::span(words).subspan(c, end - c), ctx, cfg,
        std::span(rngs).subspan(c, end - c));
    for (auto &r: rounded) {
      GenerationResult g = make_result(r.sequence, *ctx.vocab);
      g.phase1_smiles = g.smiles;
      results.push_back(std::move(g));
    }
  }
  if (cfg.max_rounds > 0)
    run_corrections(*f2, results, rngs, ctx, cfg);
  return results;
}

GenerationResult generate(const Denoiser<float> *f1, const Denoiser<float> *f2,
                          const std::string &description,
                          const SamplerContext &ctx,
                          const SamplerConfig &cfg) {
  return generate_batch(f1, f2, std::span(&description, 1), ctx, cfg)
      .front();
}

std::vector<GenerationResult> correct_batch(
    const Denoiser<float> &f2, std::span<const TokenSequence> sequences,
    const SamplerContext &ctx, const SamplerConfig &cfg,
    std::size_t first_index) {
  if (!ctx.vocab)
    throw ModelNotLoaded("vocabulary is not loaded");
  cfg.check(ctx.schedule.steps(), ctx.tau);
  std::vector<GenerationResult> results;
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    GenerationResult g = make_result(sequences[i], *ctx.vocab);
    g.phase1_smiles = g.smiles;
    results.push_back(std::move(g));
    rngs.push_back(example_rng(cfg.seed, first_index + i));
  }
  run_corrections(f2, results, rngs, ctx, cfg);
  return results;
}

}  // namespace smidiff
