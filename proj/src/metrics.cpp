//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "smidiff/errors.hpp"
#include "smidiff/smiles_graph.hpp"
#include "smidiff/smiles_tok.hpp"

namespace smidiff {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string> &tokens,
                         std::size_t order) {
  NgramCounts counts;
  if (tokens.size() < order)
    return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i,
                                      tokens.begin() + i + order)];
  return counts;
}

std::string_view trim(std::string_view s) {
  const char *ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

BleuBreakdown bleu_breakdown(
    std::span<const std::vector<std::string>> hypotheses,
    std::span<const std::vector<std::string>> references) {
  if (hypotheses.size() != references.size())
    throw LengthMismatch("BLEU needs one reference per hypothesis");
  if (hypotheses.empty())
    throw EmptyCorpus("BLEU over an empty corpus");

  BleuBreakdown out;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    out.hypothesis_length += hypotheses[i].size();
    out.reference_length += references[i].size();
    for (std::size_t order = 1; order <= 4; ++order) {
      auto hyp = count_ngrams(hypotheses[i], order);
      auto ref = count_ngrams(references[i], order);
      for (const auto &[gram, count]: hyp) {
        auto it = ref.find(gram);
        out.matches[order - 1] +=
            std::min(count, it == ref.end() ? std::size_t{ 0 } : it->second);
        out.totals[order - 1] += count;
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t k = 0; k < 4; ++k) {
    out.precision[k] =
        out.totals[k] ? static_cast<double>(out.matches[k]) / out.totals[k]
                      : 0.0;
    if (out.matches[k] == 0)
      zero = true;
    else
      log_sum += std::log(out.precision[k]) / 4.0;
  }
  const double c = static_cast<double>(out.hypothesis_length);
  const double r = static_cast<double>(out.reference_length);
  out.brevity_penalty = c == 0.0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum);
  return out;
}

double bleu(std::span<const std::vector<std::string>> hypotheses,
            std::span<const std::vector<std::string>> references) {
  return bleu_breakdown(hypotheses, references).score;
}

std::vector<std::string> bleu_units(std::string_view smiles, BleuUnit unit) {
  smiles = trim(smiles);
  if (unit == BleuUnit::kToken) {
    try {
      return split_tokens(smiles);
    } catch (const TokenizeError &) {
    }
  }
  std::vector<std::string> out;
  for (char ch: smiles)
    out.emplace_back(1, ch);
  return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j)
    prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({ prev[j] + 1, cur[j - 1] + 1,
                          prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1) });
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool exact_match(std::string_view hyp, std::string_view ref) {
  return trim(hyp) == trim(ref);
}

EvalReport evaluate(std::span<const EvalItem> results,
                    std::span<const std::string> references, BleuUnit unit) {
  if (results.size() != references.size())
    throw LengthMismatch("evaluate: " + std::to_string(results.size())
                         + " results for " + std::to_string(references.size())
                         + " references");
  if (results.empty())
    throw EmptyCorpus("evaluate over no results");

  EvalReport report;
  report.total = results.size();
  std::vector<std::vector<std::string>> hyp_units, ref_units;
  double lev = 0.0, fts = 0.0;
  std::size_t fts_count = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto &h = results[i].smiles;
    const auto &r = references[i];
    hyp_units.push_back(bleu_units(h, unit));
    ref_units.push_back(bleu_units(r, unit));
    lev += static_cast<double>(levenshtein(trim(h), trim(r)));
    if (exact_match(h, r))
      ++report.exact_count;
    if (!results[i].valid)
      continue;
    ++report.valid;
    auto hg = molecule_from_smiles(trim(h));
    auto rg = molecule_from_smiles(trim(r));
    if (hg && rg) {
      fts += tanimoto(morgan_fingerprint(*hg), morgan_fingerprint(*rg));
      ++fts_count;
    }
  }
  const double n = static_cast<double>(report.total);
  report.bleu = bleu(hyp_units, ref_units);
  report.levenshtein = lev / n;
  report.exact = report.exact_count / n;
  report.validity = report.valid / n;
  report.fts_defined = fts_count > 0;
  report.morgan_fts = fts_count ? fts / fts_count : 0.0;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu"] = bleu;
  j["exact"] = exact;
  j["levenshtein"] = levenshtein;
  j["validity"] = validity;
  j["morgan_fts"] = morgan_fts;
  j["morgan_fts_defined"] = fts_defined;
  j["total"] = total;
  j["valid"] = valid;
  j["exact_count"] = exact_count;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "metric        value\n"
                "BLEU          %.3f\n"
                "Exact         %.3f\n"
                "Levenshtein   %.3f\n"
                "Validity      %.3f\n"
                "Morgan FTS    %.3f%s\n"
                "pairs         %zu (valid %zu, exact %zu)\n",
                bleu, exact, levenshtein, validity, morgan_fts,
                fts_defined ? "" : " (undefined: no valid outputs)", total,
                valid, exact_count);
  return buf;
}

}  // namespace smidiff
