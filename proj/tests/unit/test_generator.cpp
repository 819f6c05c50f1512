//
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <memory>

#include "smidiff/errors.hpp"
#include "smidiff/generator.hpp"

using namespace smidiff;

namespace {

struct Rig {
  Vocabulary vocab;
  TextVocabulary text;
  std::unique_ptr<Denoiser<float>> f1, f2;
  SamplerContext ctx;
  SamplerConfig cfg;
  std::vector<std::string> descriptions = { "an alcohol", "a ring",
                                            "an acid with a ring" };

  Rig() {
    std::vector<std::string> smiles = { "CCO", "C1CC1", "CC(=O)O", "CN" };
    vocab = build_vocab(smiles);
    text = build_text_vocab(descriptions);
    ModelConfig c;
    c.vocab_size = vocab.size();
    c.text_vocab_size = text.size();
    c.d = 4;
    c.n = 10;
    c.d1 = 8;
    c.d2 = 16;
    c.layers = 1;
    c.heads = 2;
    c.max_text_len = 16;
    c.max_timestep = 20;
    f1 = std::make_unique<Denoiser<float>>(c, 1);
    f2 = std::make_unique<Denoiser<float>>(c, 2);
    ctx.vocab = &vocab;
    ctx.text_vocab = &text;
    ctx.schedule = build_schedule(20);
    ctx.tau = 8;
    cfg.steps1 = 10;
    cfg.steps2 = 4;
    cfg.renoise = 8;
    cfg.seed = 3;
  }
};

}  // namespace

TEST(Generator, ConfigValidation) {
  SamplerConfig c;
  c.steps1 = 10;
  c.steps2 = 4;
  c.renoise = 8;
  EXPECT_NO_THROW(c.check(20, 8));
  c.renoise = 9;
  EXPECT_THROW(c.check(20, 8), InvalidArgument);
  c.renoise = 8;
  c.steps2 = 9;
  EXPECT_THROW(c.check(20, 8), InvalidArgument);
  c.steps2 = 4;
  c.steps1 = 21;
  EXPECT_THROW(c.check(20, 8), InvalidArgument);
  c.steps1 = 10;
  c.max_rounds = -1;
  EXPECT_THROW(c.check(20, 8), InvalidArgument);
}

TEST(Generator, OutputsFollowTheSequenceLayout) {
  Rig s;
  auto out = generate_batch(s.f1.get(), s.f2.get(), s.descriptions, s.ctx,
                            s.cfg);
  ASSERT_EQ(out.size(), 3u);
  for (const auto &r: out) {
    ASSERT_EQ(r.sequence.length(), 10);
    EXPECT_EQ(r.sequence.ids().front(), kSos);
    EXPECT_EQ(r.smiles, detokenize(r.sequence, s.vocab));
    EXPECT_EQ(r.valid, validate_smiles(r.smiles).valid);
    EXPECT_EQ(r.corrected, r.rounds > 0);
    EXPECT_LE(r.rounds, 1);
    if (!r.corrected)
      EXPECT_EQ(r.phase1_smiles, r.smiles);
  }
}

TEST(Generator, SeedDeterminism) {
  Rig s;
  auto a = generate_batch(s.f1.get(), s.f2.get(), s.descriptions, s.ctx,
                          s.cfg);
  auto b = generate_batch(s.f1.get(), s.f2.get(), s.descriptions, s.ctx,
                          s.cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sequence, b[i].sequence);
    EXPECT_EQ(a[i].phase1_smiles, b[i].phase1_smiles);
  }
  auto single = generate(s.f1.get(), s.f2.get(), s.descriptions[0], s.ctx,
                         s.cfg);
  EXPECT_EQ(single.phase1_smiles, a[0].phase1_smiles);

  s.cfg.seed = 4;
  s.cfg.max_rounds = 0;
  auto c = generate_batch(s.f1.get(), nullptr, s.descriptions, s.ctx, s.cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    differs |= c[i].phase1_smiles != a[i].phase1_smiles;
  EXPECT_TRUE(differs);
}

TEST(Generator, PhaseOneOnlySkipsCorrection) {
  Rig s;
  s.cfg.max_rounds = 0;
  auto out = generate_batch(s.f1.get(), nullptr, s.descriptions, s.ctx,
                            s.cfg);
  for (const auto &r: out) {
    EXPECT_FALSE(r.corrected);
    EXPECT_EQ(r.rounds, 0);
  }
}

TEST(Generator, MissingModelsAndBlankText) {
  Rig s;
  EXPECT_THROW(generate_batch(nullptr, s.f2.get(), s.descriptions, s.ctx,
                              s.cfg),
               ModelNotLoaded);
  EXPECT_THROW(generate_batch(s.f1.get(), nullptr, s.descriptions, s.ctx,
                              s.cfg),
               ModelNotLoaded);
  std::vector<std::string> blank = { "an alcohol", " ;; " };
  EXPECT_THROW(generate_batch(s.f1.get(), s.f2.get(), blank, s.ctx, s.cfg),
               EmptyText);
}

TEST(Generator, GateLeavesValidSequencesAlone) {
  Rig s;
  std::vector<TokenSequence> seqs = { tokenize("CCO", s.vocab, 10),
                                      tokenize("CC(=O", s.vocab, 10),
                                      tokenize("C1CC1", s.vocab, 10) };
  auto out = correct_batch(*s.f2, seqs, s.ctx, s.cfg);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_FALSE(out[0].corrected);
  EXPECT_EQ(out[0].sequence, seqs[0]);
  EXPECT_TRUE(out[1].corrected);
  EXPECT_EQ(out[1].rounds, 1);
  EXPECT_EQ(out[1].phase1_smiles, "CC(=O");
  EXPECT_FALSE(out[2].corrected);
  EXPECT_EQ(out[2].smiles, "C1CC1");

  // More rounds only ever revisit the still-invalid members.
  s.cfg.max_rounds = 3;
  auto more = correct_batch(*s.f2, seqs, s.ctx, s.cfg);
  EXPECT_EQ(more[0].rounds, 0);
  EXPECT_GE(more[1].rounds, 1);
  EXPECT_LE(more[1].rounds, 3);
  if (more[1].rounds < 3)
    EXPECT_TRUE(more[1].valid);
}

TEST(Generator, PhaseTwoReturnsOneRoundingPerInput) {
  Rig s;
  std::vector<TokenSequence> seqs = { tokenize("CCO", s.vocab, 10),
                                      tokenize("CN", s.vocab, 10) };
  std::vector<Rng> rngs = { example_rng(1, 0), example_rng(1, 1) };
  auto out = phase_two_correct(*s.f2, seqs, s.ctx, s.cfg, rngs);
  ASSERT_EQ(out.size(), 2u);
  for (const auto &r: out) {
    EXPECT_EQ(r.sequence.length(), 10);
    EXPECT_EQ(r.raw_argmax.size(), 10u);
    EXPECT_EQ(r.log_probs.size(), 10u * s.vocab.size());
  }
}

TEST(Generator, ExampleStreamsAreDistinct) {
  auto a = example_rng(7, 0), b = example_rng(7, 1), c = example_rng(8, 0),
       d = example_rng(7, 0);
  auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_EQ(x, d.next_u64());
}
