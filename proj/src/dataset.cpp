//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "smidiff/errors.hpp"
#include "smidiff/rng.hpp"
#include "smidiff/smiles_graph.hpp"
#include "smidiff/text.hpp"

namespace smidiff {

namespace {

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void strip_cr(std::string &line) {
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
}

std::size_t column_index(const std::vector<std::string> &header,
                         const std::string &name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return i;
  throw HeaderError("missing column '" + name + "' in header");
}

}  // namespace

ColumnFormat ColumnFormat::parse(const std::string &spec) {
  ColumnFormat format;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty())
      continue;
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw InvalidArgument("bad column mapping '" + item
                            + "', expected key=column");
    std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "cid")
      format.cid = value;
    else if (key == "smiles")
      format.smiles = value;
    else if (key == "description")
      format.description = value;
    else
      throw InvalidArgument("unknown column key '" + key + "'");
  }
  return format;
}

IngestResult ingest_dataset(std::istream &is,
                            const std::optional<Vocabulary> &vocab, int n,
                            const ColumnFormat &format) {
  std::string line;
  if (!std::getline(is, line))
    throw HeaderError("dataset is empty; expected a header line");
  strip_cr(line);
  auto header = split_tabs(line);
  const auto ci = column_index(header, format.cid);
  const auto si = column_index(header, format.smiles);
  const auto di = column_index(header, format.description);
  const auto needed = std::max({ ci, si, di }) + 1;

  IngestResult result;
  std::vector<std::vector<std::string>> token_lists;
  while (std::getline(is, line)) {
    strip_cr(line);
    if (line.empty())
      continue;
    ++result.total;
    auto fields = split_tabs(line);
    if (fields.size() < needed || fields[si].empty()
        || split_words(fields[di]).empty()) {
      ++result.dropped;
      continue;
    }
    std::vector<std::string> tokens;
    try {
      tokens = split_tokens(fields[si]);
    } catch (const TokenizeError &) {
      ++result.dropped;
      continue;
    }
    bool unknown = false;
    if (vocab)
      for (const auto &t: tokens)
        unknown = unknown || !vocab->contains(t);
    if (tokens.empty() || static_cast<int>(tokens.size()) + 2 > n
        || unknown) {
      ++result.dropped;
      continue;
    }
    result.records.push_back({ fields[ci], fields[si], fields[di] });
  }

  if (vocab) {
    result.vocab = *vocab;
  } else {
    std::vector<std::string> corpus;
    corpus.reserve(result.records.size());
    for (const auto &r: result.records)
      corpus.push_back(r.smiles);
    result.vocab = build_vocab(corpus);
  }
  return result;
}

IngestResult ingest_dataset(const std::string &path,
                            const std::optional<Vocabulary> &vocab, int n,
                            const ColumnFormat &format) {
  std::ifstream in(path);
  if (!in)
    throw FileError("cannot open dataset '" + path + "'");
  return ingest_dataset(in, vocab, n, format);
}

void write_dataset(std::ostream &os,
                   const std::vector<DatasetRecord> &records) {
  os << "CID\tSMILES\tdescription\n";
  for (const auto &r: records)
    os << r.cid << '\t' << r.smiles << '\t' << r.description << '\n';
}

void write_dataset(const std::string &path,
                   const std::vector<DatasetRecord> &records) {
  std::ofstream out(path);
  if (!out)
    throw FileError("cannot write dataset '" + path + "'");
  write_dataset(out, records);
  if (!out)
    throw FileError("failed writing dataset '" + path + "'");
}

// ---------------------------------------------------------------------------
// Synthetic molecules

namespace {

struct RingKind {
  const char *name;
  const char *smiles;
};

struct GroupKind {
  const char *name;
  const char *smiles;  // substituent written after the carbon
};

constexpr std::array<RingKind, 11> kRings = { {
    { "", "" },
    { "cyclopropyl", "C1CC1" },
    { "cyclobutyl", "C1CCC1" },
    { "cyclopentyl", "C1CCCC1" },
    { "cyclohexyl", "C1CCCCC1" },
    { "phenyl", "c1ccccc1" },
    { "pyridyl", "c1ccncc1" },
    { "furyl", "c1ccoc1" },
    { "thienyl", "c1ccsc1" },
    { "piperidyl", "C1CCNCC1" },
    { "oxanyl", "C1CCOCC1" },
} };

constexpr std::array<GroupKind, 17> kGroups = { {
    { "", "" },
    { "hydroxyl", "O" },
    { "amino", "N" },
    { "methoxy", "OC" },
    { "fluoro", "F" },
    { "chloro", "Cl" },
    { "bromo", "Br" },
    { "oxo", "=O" },
    { "carboxyl", "C(=O)O" },
    { "cyano", "C#N" },
    { "thiol", "S" },
    { "iodo", "I" },
    { "vinyl", "C=C" },
    { "ethynyl", "C#C" },
    { "amide", "C(=O)N" },
    { "nitro", "[N+](=O)[O-]" },
    { "ammonium", "[NH3+]" },
} };

constexpr std::array<const char *, 3> kBranches = { "", "methyl", "ethyl" };
constexpr std::array<const char *, 3> kBranchSmiles = { "", "C", "CC" };

constexpr std::array<const char *, 10> kChains = {
  "methane", "ethane", "propane", "butane", "pentane",
  "hexane", "heptane", "octane", "nonane", "decane",
};

struct SynthSpec {
  int ring;
  int chain;   // carbons
  int group;
  int group_at;
  int branch;     // index into kBranches, 0 = none
  int branch_at;
};

std::string with_article(const std::string &word) {
  const bool vowel = !word.empty()
                     && std::string_view("aeiou").find(word[0])
                            != std::string_view::npos;
  return (vowel ? "an " : "a ") + word;
}

std::string build_smiles(const SynthSpec &s) {
  std::string out = kRings[s.ring].smiles;
  for (int i = 1; i <= s.chain; ++i) {
    out += 'C';
    std::vector<std::string> subs;
    if (s.branch != 0 && s.branch_at == i)
      subs.emplace_back(kBranchSmiles[s.branch]);
    if (s.group != 0 && s.group_at == i)
      subs.emplace_back(kGroups[s.group].smiles);
    for (std::size_t k = 0; k < subs.size(); ++k) {
      bool bare = i == s.chain && k + 1 == subs.size();
      out += bare ? subs[k] : "(" + subs[k] + ")";
    }
  }
  return out;
}

std::string build_description(const SynthSpec &s) {
  std::string out = "The molecule is ";
  if (s.ring != 0)
    out += with_article(kRings[s.ring].name) + " substituted ";
  out += (s.ring != 0 ? std::string(kChains[s.chain - 1])
                      : with_article(kChains[s.chain - 1]))
         + " chain of "
         + std::to_string(s.chain)
         + (s.chain == 1 ? " carbon" : " carbons");
  if (s.group == 0)
    out += " with no functional group";
  else
    out += " bearing " + with_article(kGroups[s.group].name)
           + " group at carbon " + std::to_string(s.group_at);
  if (s.branch != 0)
    out += " and " + with_article(kBranches[s.branch]) + " branch at carbon "
           + std::to_string(s.branch_at);
  out += s.ring == 0 ? " and no ring." : ".";
  return out;
}

struct SynthEntry {
  std::string smiles;
  std::string description;
};

std::vector<SynthEntry> enumerate_space(int max_len) {
  std::vector<SynthEntry> out;
  std::unordered_set<std::string> seen;
  for (int ring = 0; ring < static_cast<int>(kRings.size()); ++ring) {
    for (int chain = 1; chain <= 10; ++chain) {
      for (int group = 0; group < static_cast<int>(kGroups.size()); ++group) {
        const int positions = group == 0 ? 1 : chain;
        for (int at = 1; at <= positions; ++at) {
          // Branch positions 2..chain-1: a branch on either end carbon
          // would only extend the chain. Slot 0 stands for "no branch".
          for (int branch_at = 0; branch_at < std::max(1, chain - 1);
               ++branch_at) {
            for (int branch = branch_at == 0 ? 0 : 1;
                 branch < (branch_at == 0 ? 1 : static_cast<int>(kBranches.size()));
                 ++branch) {
              SynthSpec spec{ ring, chain, group, group == 0 ? 0 : at, branch,
                              branch_at == 0 ? 0 : branch_at + 1 };
              std::string smiles = build_smiles(spec);
              auto tokens = split_tokens(smiles);
              if (static_cast<int>(tokens.size()) + 2 > max_len)
                continue;
              auto graph = molecule_from_smiles(smiles);
              if (!graph)
                continue;
              const auto heavy = graph->atoms().size();
              if (heavy < 3 || heavy > 12)
                continue;
              if (!seen.insert(smiles).second)
                continue;
              out.push_back({ std::move(smiles), build_description(spec) });
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

std::size_t synth_space_size(int max_len) {
  return enumerate_space(max_len).size();
}

std::vector<DatasetRecord> synth_dataset(std::size_t count, std::uint64_t seed,
                                         int max_len) {
  auto space = enumerate_space(max_len);
  if (count > space.size())
    throw InvalidArgument("requested " + std::to_string(count)
                          + " synthetic molecules but only "
                          + std::to_string(space.size()) + " exist");
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(space.size()) - 1));
    std::swap(space[i], space[j]);
  }
  std::vector<DatasetRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char cid[32];
    std::snprintf(cid, sizeof cid, "SYN%06zu", i + 1);
    out.push_back({ cid, std::move(space[i].smiles),
                    std::move(space[i].description) });
  }
  return out;
}

}  // namespace smidiff
