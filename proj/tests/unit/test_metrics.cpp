//
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <nlohmann/json.hpp>

#include "smidiff/errors.hpp"
#include "smidiff/metrics.hpp"
#include "smidiff/smiles_graph.hpp"

using namespace smidiff;

namespace {

using Units = std::vector<std::string>;

std::size_t edit_distance_oracle(const std::string &a, const std::string &b) {
  // Plain recursion, exponential but fine for short strings.
  std::function<std::size_t(std::size_t, std::size_t)> go =
      [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size())
      return b.size() - j;
    if (j == b.size())
      return a.size() - i;
    if (a[i] == b[j])
      return go(i + 1, j + 1);
    return 1 + std::min({ go(i + 1, j), go(i, j + 1), go(i + 1, j + 1) });
  };
  return go(0, 0);
}

std::vector<EvalItem> as_items(const std::vector<std::string> &smiles) {
  std::vector<EvalItem> out;
  for (const auto &s: smiles)
    out.push_back({ s, validate_smiles(s).valid });
  return out;
}

}  // namespace

TEST(Bleu, HandComputedSinglePair) {
  // Precisions 4/5, 3/4, 2/3, 1/2 with equal lengths: (1/5)^(1/4).
  std::vector<Units> hyp = { { "C", "O", "N", "S", "F" } };
  std::vector<Units> ref = { { "C", "O", "N", "S", "P" } };
  auto b = bleu_breakdown(hyp, ref);
  EXPECT_EQ(b.matches, (std::array<std::size_t, 4>{ 4, 3, 2, 1 }));
  EXPECT_EQ(b.totals, (std::array<std::size_t, 4>{ 5, 4, 3, 2 }));
  EXPECT_DOUBLE_EQ(b.brevity_penalty, 1.0);
  EXPECT_NEAR(b.score, std::pow(0.2, 0.25), 1e-12);
}

TEST(Bleu, BrevityPenaltyAndClipping) {
  std::vector<Units> hyp = { { "C", "C", "O", "N" } };
  std::vector<Units> ref = { { "C", "C", "O", "N", "S", "F" } };
  auto b = bleu_breakdown(hyp, ref);
  EXPECT_NEAR(b.brevity_penalty, std::exp(-0.5), 1e-15);
  EXPECT_NEAR(b.score, std::exp(-0.5), 1e-12);

  // "C C C C" against "C C": unigram matches are clipped at 2.
  std::vector<Units> h2 = { { "C", "C", "C", "C" } };
  std::vector<Units> r2 = { { "C", "C" } };
  auto c = bleu_breakdown(h2, r2);
  EXPECT_EQ(c.matches[0], 2u);
  EXPECT_EQ(c.matches[1], 1u);
  EXPECT_EQ(c.score, 0.0);  // no 3-gram or 4-gram match

  // Too short for any 4-gram: precisions stay informative, score is 0.
  std::vector<Units> h3 = { { "C", "C", "O" } };
  std::vector<Units> r3 = { { "C", "C", "C", "O" } };
  auto d = bleu_breakdown(h3, r3);
  EXPECT_DOUBLE_EQ(d.precision[0], 1.0);
  EXPECT_DOUBLE_EQ(d.precision[1], 1.0);
  EXPECT_NEAR(d.brevity_penalty, std::exp(1.0 - 4.0 / 3.0), 1e-15);
  EXPECT_EQ(d.score, 0.0);
}

TEST(Bleu, CorpusPoolsCounts) {
  // Pooled: 1-grams 6/7, 2-grams 4/5, 3-grams 2/3, 4-grams 1/2.
  std::vector<Units> hyp = { { "C", "O", "N", "S", "F" }, { "C", "C" } };
  std::vector<Units> ref = { { "C", "O", "N", "S", "P" }, { "C", "C" } };
  EXPECT_NEAR(bleu(hyp, ref),
              std::pow(6.0 / 7 * 4.0 / 5 * 2.0 / 3 * 0.5, 0.25), 1e-12);
}

TEST(Bleu, IdentityDisjointAndErrors) {
  std::vector<Units> a = { { "C", "C", "O", "N", "C" } };
  EXPECT_DOUBLE_EQ(bleu(a, a), 1.0);
  std::vector<Units> b = { { "S", "S", "P", "F", "F" } };
  EXPECT_EQ(bleu(a, b), 0.0);
  std::vector<Units> none;
  EXPECT_THROW(bleu(none, none), EmptyCorpus);
  EXPECT_THROW(bleu(a, std::vector<Units>{ {}, {} }), LengthMismatch);
}

TEST(Bleu, Units) {
  EXPECT_EQ(bleu_units("CCl[NH4+]", BleuUnit::kToken),
            (Units{ "C", "Cl", "[NH4+]" }));
  EXPECT_EQ(bleu_units("CCl", BleuUnit::kCharacter), (Units{ "C", "C", "l" }));
  EXPECT_EQ(bleu_units("C[Xx", BleuUnit::kToken),
            (Units{ "C", "[", "X", "x" }));
}

TEST(Levenshtein, MatchesRecursiveOracle) {
  std::mt19937 gen(5);
  const std::string alphabet = "CON(1=";
  for (int trial = 0; trial < 300; ++trial) {
    std::string a, b;
    for (int k = gen() % 7; k > 0; --k)
      a += alphabet[gen() % alphabet.size()];
    for (int k = gen() % 7; k > 0; --k)
      b += alphabet[gen() % alphabet.size()];
    EXPECT_EQ(levenshtein(a, b), edit_distance_oracle(a, b)) << a << " " << b;
  }
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("", "CCO"), 3u);
}

TEST(Evaluate, ReferencesAgainstThemselves) {
  std::vector<std::string> refs = { "CCO", "c1ccccc1O", "CC(=O)Nc1ccccc1",
                                    "C1CCCCC1N" };
  auto report = evaluate(as_items(refs), refs);
  EXPECT_DOUBLE_EQ(report.bleu, 1.0);
  EXPECT_DOUBLE_EQ(report.exact, 1.0);
  EXPECT_DOUBLE_EQ(report.levenshtein, 0.0);
  EXPECT_DOUBLE_EQ(report.validity, 1.0);
  EXPECT_TRUE(report.fts_defined);
  EXPECT_DOUBLE_EQ(report.morgan_fts, 1.0);
  auto j = nlohmann::json::parse(report.to_json());
  EXPECT_EQ(j["exact_count"], 4);
  EXPECT_NE(report.to_table().find("BLEU"), std::string::npos);
}

TEST(Evaluate, ExactMatchTrimsOnly) {
  EXPECT_TRUE(exact_match(" CCO\n", "CCO"));
  EXPECT_FALSE(exact_match("OCC", "CCO"));  // same molecule, other string
}

TEST(Evaluate, AllInvalidLeavesSimilarityUndefined) {
  std::vector<std::string> refs = { "CCO", "CN" };
  std::vector<EvalItem> items = { { "C(C", false }, { "C1C", false } };
  auto report = evaluate(items, refs);
  EXPECT_EQ(report.validity, 0.0);
  EXPECT_FALSE(report.fts_defined);
  EXPECT_NE(report.to_table().find("undefined"), std::string::npos);
  EXPECT_DOUBLE_EQ(report.levenshtein, 2.0);
}

TEST(Evaluate, SimilarityAveragesValidOnly) {
  std::vector<std::string> refs = { "CCO", "CCCC" };
  std::vector<EvalItem> items = { { "CCO", true }, { "C(", false } };
  auto report = evaluate(items, refs);
  EXPECT_DOUBLE_EQ(report.morgan_fts, 1.0);
  EXPECT_DOUBLE_EQ(report.validity, 0.5);
}

TEST(Evaluate, PermutationInvariant) {
  std::vector<std::string> refs = { "CCO", "c1ccccc1O", "CC(=O)O", "CCN",
                                    "C1CC1" };
  std::vector<std::string> hyps = { "CCN", "c1ccccc1", "CC(=O)O", "CC",
                                    "C1CC" };
  auto base = evaluate(as_items(hyps), refs);
  std::vector<std::size_t> order = { 3, 0, 4, 2, 1 };
  std::vector<std::string> r2, h2;
  for (auto i: order) {
    r2.push_back(refs[i]);
    h2.push_back(hyps[i]);
  }
  auto perm = evaluate(as_items(h2), r2);
  EXPECT_NEAR(perm.bleu, base.bleu, 1e-12);
  EXPECT_NEAR(perm.levenshtein, base.levenshtein, 1e-12);
  EXPECT_NEAR(perm.morgan_fts, base.morgan_fts, 1e-12);
  EXPECT_EQ(perm.valid, base.valid);
  std::vector<std::string> short_refs = { "CCO" };
  EXPECT_THROW(evaluate(as_items(hyps), short_refs), LengthMismatch);
}
