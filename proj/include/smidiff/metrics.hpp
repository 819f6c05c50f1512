//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_METRICS_HPP_
#define SMIDIFF_METRICS_HPP_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smidiff {

struct BleuBreakdown {
  double score = 0.0;
  std::array<double, 4> precision{};         // clipped n-gram precisions
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
  double brevity_penalty = 0.0;
};

// Corpus BLEU-4 with uniform weights over pre-split token lists. Throws
// EmptyCorpus for no pairs and LengthMismatch for unequal list sizes.
BleuBreakdown bleu_breakdown(
    std::span<const std::vector<std::string>> hypotheses,
    std::span<const std::vector<std::string>> references);

double bleu(std::span<const std::vector<std::string>> hypotheses,
            std::span<const std::vector<std::string>> references);

enum class BleuUnit { kToken, kCharacter };

// Splits SMILES into BLEU units; strings the tokenizer rejects fall back to
// characters.
std::vector<std::string> bleu_units(std::string_view smiles, BleuUnit unit);

// Unit-cost character edit distance.
std::size_t levenshtein(std::string_view a, std::string_view b);

// Equality after trimming surrounding whitespace.
bool exact_match(std::string_view hyp, std::string_view ref);

struct EvalItem {
  std::string smiles;
  bool valid = false;
};

struct EvalReport {
  double bleu = 0.0;
  double levenshtein = 0.0;  // mean
  double exact = 0.0;
  double validity = 0.0;
  double morgan_fts = 0.0;
  bool fts_defined = false;  // false when no hypothesis is valid
  std::size_t total = 0;
  std::size_t valid = 0;
  std::size_t exact_count = 0;

  std::string to_json() const;
  std::string to_table() const;
};

// Throws LengthMismatch / EmptyCorpus. Fingerprint similarity averages only
// over valid hypotheses whose reference also parses.
EvalReport evaluate(std::span<const EvalItem> results,
                    std::span<const std::string> references,
                    BleuUnit unit = BleuUnit::kToken);

}  // namespace smidiff

#endif  // SMIDIFF_METRICS_HPP_
