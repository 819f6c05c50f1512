//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/smiles_graph.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "smidiff/errors.hpp"

namespace smidiff {

// ---------------------------------------------------------------------------
// MolecularGraph

int MolecularGraph::add_atom(Atom atom) {
  atoms_.push_back(std::move(atom));
  adjacency_.emplace_back();
  return num_atoms() - 1;
}

bool MolecularGraph::has_bond(int a, int b) const {
  if (a < 0 || a >= num_atoms())
    return false;
  return std::any_of(adjacency_[a].begin(), adjacency_[a].end(),
                     [b](const auto &nb) { return nb.first == b; });
}

void MolecularGraph::add_bond(int a, int b, BondOrder order) {
  if (a < 0 || b < 0 || a >= num_atoms() || b >= num_atoms())
    throw InvalidArgument("bond endpoint out of range");
  if (a == b)
    throw InvalidArgument("self-bond on atom " + std::to_string(a));
  if (has_bond(a, b))
    throw InvalidArgument("duplicate bond between atoms " + std::to_string(a)
                          + " and " + std::to_string(b));
  bonds_.push_back({ a, b, order });
  adjacency_[a].emplace_back(b, order);
  adjacency_[b].emplace_back(a, order);
}

// ---------------------------------------------------------------------------
// Diagnostics

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::kUnclosedRing:
      return "UnclosedRing";
    case DiagnosticKind::kUnmatchedParenthesis:
      return "UnmatchedParenthesis";
    case DiagnosticKind::kValenceError:
      return "ValenceError";
    case DiagnosticKind::kSyntaxError:
      return "SyntaxError";
  }
  return "Unknown";
}

bool ValidityReport::has(DiagnosticKind kind) const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [kind](const Diagnostic &d) { return d.kind == kind; });
}

std::string ValidityReport::render() const {
  std::ostringstream os;
  for (const auto &d: diagnostics)
    os << d.position << ' ' << to_string(d.kind) << ' ' << d.message << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Bracket atoms

namespace {

constexpr std::array<std::string_view, 118> kElements = {
  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
  "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
  "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
  "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
  "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
  "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
  "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
  "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
  "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
  "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
};

bool is_element(std::string_view sym) {
  return std::find(kElements.begin(), kElements.end(), sym)
         != kElements.end();
}

std::string capitalize(std::string_view sym) {
  std::string out(sym);
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

bool parse_uint(std::string_view s, std::size_t &i, int &value) {
  std::size_t start = i;
  value = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    value = value * 10 + (s[i] - '0');
    if (value > 999)
      return false;
    ++i;
  }
  return i > start;
}

// Parses the content of "[...]". Returns an error message on failure.
std::optional<std::string> parse_bracket(std::string_view tok, Atom &atom) {
  std::string_view s = tok.substr(1, tok.size() - 2);
  std::size_t i = 0;
  int isotope;
  parse_uint(s, i, isotope);

  if (i >= s.size())
    return "bracket atom without element";

  if (s[i] == '*') {
    atom.element = "*";
    ++i;
  } else if (std::islower(static_cast<unsigned char>(s[i]))) {
    // Aromatic: b c n o p s se as te
    static constexpr std::array<std::string_view, 9> kAromatic = {
      "se", "as", "te", "b", "c", "n", "o", "p", "s" };
    bool found = false;
    for (auto sym: kAromatic) {
      if (s.substr(i, sym.size()) == sym) {
        atom.element = capitalize(sym);
        atom.aromatic = true;
        i += sym.size();
        found = true;
        break;
      }
    }
    if (!found)
      return "unknown aromatic element in " + std::string(tok);
  } else if (std::isupper(static_cast<unsigned char>(s[i]))) {
    if (i + 1 < s.size() && std::islower(static_cast<unsigned char>(s[i + 1]))
        && is_element(s.substr(i, 2))) {
      atom.element = std::string(s.substr(i, 2));
      i += 2;
    } else if (is_element(s.substr(i, 1))) {
      atom.element = std::string(s.substr(i, 1));
      i += 1;
    } else {
      return "unknown element in " + std::string(tok);
    }
  } else {
    return "malformed bracket atom " + std::string(tok);
  }

  // Chirality, ignored.
  if (i < s.size() && s[i] == '@') {
    ++i;
    if (i < s.size() && s[i] == '@') {
      ++i;
    } else {
      while (i < s.size() && std::isupper(static_cast<unsigned char>(s[i]))
             && s[i] != 'H')
        ++i;
      int cls;
      parse_uint(s, i, cls);
    }
  }

  if (i < s.size() && s[i] == 'H') {
    ++i;
    int h = 1;
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
      parse_uint(s, i, h);
    atom.explicit_h = h;
  }

  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    char sign = s[i];
    int mag = 1;
    ++i;
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      parse_uint(s, i, mag);
    } else {
      while (i < s.size() && s[i] == sign) {
        ++mag;
        ++i;
      }
    }
    atom.charge = sign == '+' ? mag : -mag;
  }

  if (i < s.size() && s[i] == ':') {
    ++i;
    int cls;
    if (!parse_uint(s, i, cls))
      return "malformed atom class in " + std::string(tok);
  }

  if (i != s.size())
    return "unexpected characters in " + std::string(tok);
  return std::nullopt;
}

std::optional<BondOrder> bond_order_of(std::string_view tok) {
  switch (tok[0]) {
    case '-': case '/': case '\\':
      return BondOrder::kSingle;
    case '=':
      return BondOrder::kDouble;
    case '#':
      return BondOrder::kTriple;
    case ':':
      return BondOrder::kAromatic;
    default:
      return std::nullopt;
  }
}

int ring_number(std::string_view tok) {
  if (tok[0] == '%')
    return (tok[1] - '0') * 10 + (tok[2] - '0');
  return tok[0] - '0';
}

class StructureParser {
 public:
  ParseResult run(std::span<const std::string> tokens) {
    for (int pos = 0; pos < static_cast<int>(tokens.size()); ++pos)
      step(tokens[pos], pos);
    finish();
    if (!report_.diagnostics.empty()) {
      report_.valid = false;
      std::stable_sort(report_.diagnostics.begin(), report_.diagnostics.end(),
                       [](const Diagnostic &a, const Diagnostic &b) {
                         return a.position < b.position;
                       });
      return report_;
    }
    return std::move(graph_);
  }

 private:
  enum class Last { kNone, kAtom, kRing, kOpen, kClose, kBond, kDot };

  struct OpenRing {
    int atom;
    std::optional<BondOrder> order;
    int pos;
  };

  void error(DiagnosticKind kind, int pos, std::string msg) {
    report_.diagnostics.push_back({ kind, pos, std::move(msg) });
  }

  BondOrder implicit_order(int a, int b) const {
    return graph_.atoms()[a].aromatic && graph_.atoms()[b].aromatic
               ? BondOrder::kAromatic
               : BondOrder::kSingle;
  }

  void step(const std::string &tok, int pos) {
    switch (classify_token(tok)) {
      case TokenClass::kAtom:
        on_atom(tok, pos);
        break;
      case TokenClass::kBond:
        on_bond(tok, pos);
        break;
      case TokenClass::kRingBond:
        on_ring(tok, pos);
        break;
      case TokenClass::kOpenBranch:
        on_open(pos);
        break;
      case TokenClass::kCloseBranch:
        on_close(pos);
        break;
      case TokenClass::kDot:
        on_dot(pos);
        break;
      case TokenClass::kSpecial:
        error(DiagnosticKind::kSyntaxError, pos,
              "unexpected token " + tok + " in SMILES payload");
        break;
    }
  }

  void on_atom(const std::string &tok, int pos) {
    Atom atom;
    atom.token_pos = pos;
    if (tok.front() == '[') {
      atom.bracket = true;
      if (auto err = parse_bracket(tok, atom)) {
        error(DiagnosticKind::kSyntaxError, pos, *err);
        atom = Atom { "*", false, true, 0, 0, pos };
      }
    } else {
      atom.aromatic = std::islower(static_cast<unsigned char>(tok[0])) != 0;
      atom.element = tok == "*" ? "*" : capitalize(tok);
    }
    int idx = graph_.add_atom(std::move(atom));
    if (prev_ >= 0) {
      BondOrder order = pending_.value_or(implicit_order(prev_, idx));
      graph_.add_bond(prev_, idx, order);
    }
    pending_.reset();
    prev_ = idx;
    last_ = Last::kAtom;
  }

  void on_bond(const std::string &tok, int pos) {
    if (last_ == Last::kBond) {
      error(DiagnosticKind::kSyntaxError, pos, "consecutive bond symbols");
      return;
    }
    if (prev_ < 0) {
      error(DiagnosticKind::kSyntaxError, pos,
            "bond symbol " + tok + " without a preceding atom");
      return;
    }
    pending_ = bond_order_of(tok);
    pending_pos_ = pos;
    before_bond_ = last_;
    last_ = Last::kBond;
  }

  void on_ring(const std::string &tok, int pos) {
    Last anchor = last_ == Last::kBond ? before_bond_ : last_;
    if (prev_ < 0 || (anchor != Last::kAtom && anchor != Last::kRing)) {
      error(DiagnosticKind::kSyntaxError, pos,
            "ring bond " + tok + " does not follow an atom");
      pending_.reset();
      if (last_ == Last::kBond)
        last_ = before_bond_;
      return;
    }
    int num = ring_number(tok);
    auto it = rings_.find(num);
    if (it == rings_.end()) {
      rings_.emplace(num, OpenRing { prev_, pending_, pos });
    } else {
      OpenRing open = it->second;
      rings_.erase(it);
      if (open.atom == prev_) {
        error(DiagnosticKind::kSyntaxError, pos,
              "ring bond " + tok + " closes on its own atom");
      } else if (open.order && pending_ && *open.order != *pending_) {
        error(DiagnosticKind::kSyntaxError, pos,
              "conflicting bond orders on ring bond " + tok);
      } else if (graph_.has_bond(open.atom, prev_)) {
        error(DiagnosticKind::kSyntaxError, pos,
              "ring bond " + tok + " duplicates an existing bond");
      } else {
        BondOrder order = open.order
                              ? *open.order
                              : pending_.value_or(
                                  implicit_order(open.atom, prev_));
        graph_.add_bond(open.atom, prev_, order);
      }
    }
    pending_.reset();
    last_ = Last::kRing;
  }

  void on_open(int pos) {
    if (last_ != Last::kAtom && last_ != Last::kRing
        && last_ != Last::kClose) {
      error(DiagnosticKind::kSyntaxError, pos,
            "branch does not follow an atom");
    }
    pending_.reset();
    branches_.emplace_back(prev_, pos);
    last_ = Last::kOpen;
  }

  void on_close(int pos) {
    if (branches_.empty()) {
      error(DiagnosticKind::kUnmatchedParenthesis, pos,
            "')' without matching '('");
      return;
    }
    if (last_ == Last::kOpen)
      error(DiagnosticKind::kSyntaxError, pos, "empty branch");
    else if (last_ == Last::kBond)
      error(DiagnosticKind::kSyntaxError, pending_pos_,
            "bond symbol at end of branch");
    prev_ = branches_.back().first;
    branches_.pop_back();
    pending_.reset();
    last_ = Last::kClose;
  }

  void on_dot(int pos) {
    if (last_ != Last::kAtom && last_ != Last::kRing
        && last_ != Last::kClose)
      error(DiagnosticKind::kSyntaxError, pos,
            "'.' does not follow a complete fragment");
    pending_.reset();
    prev_ = -1;
    last_ = Last::kDot;
  }

  void finish() {
    if (graph_.num_atoms() == 0 && report_.diagnostics.empty()) {
      error(DiagnosticKind::kSyntaxError, 0, "empty molecule");
    }
    if (last_ == Last::kBond)
      error(DiagnosticKind::kSyntaxError, pending_pos_,
            "dangling bond symbol at end of string");
    if (last_ == Last::kDot)
      error(DiagnosticKind::kSyntaxError, 0, "dangling '.' at end of string");
    for (const auto &[atom, pos]: branches_)
      error(DiagnosticKind::kUnmatchedParenthesis, pos,
            "'(' without matching ')'");
    for (const auto &[num, open]: rings_)
      error(DiagnosticKind::kUnclosedRing, open.pos,
            "ring bond " + std::to_string(num) + " is never closed");
  }

  MolecularGraph graph_;
  ValidityReport report_;
  std::vector<std::pair<int, int>> branches_;
  std::map<int, OpenRing> rings_;
  std::optional<BondOrder> pending_;
  int pending_pos_ = 0;
  int prev_ = -1;
  Last last_ = Last::kNone;
  Last before_bond_ = Last::kNone;
};

std::vector<std::string> payload_strings(const TokenSequence &seq,
                                         const Vocabulary &vocab) {
  return payload_tokens(seq, vocab);
}

}  // namespace

ParseResult parse(std::span<const std::string> tokens) {
  return StructureParser().run(tokens);
}

ParseResult parse(const TokenSequence &seq, const Vocabulary &vocab) {
  auto tokens = payload_strings(seq, vocab);
  return parse(tokens);
}

// ---------------------------------------------------------------------------
// Valence

std::vector<int> permitted_valences(std::string_view element, int charge) {
  std::vector<int> base;
  if (element == "B")
    base = { 3 };
  else if (element == "C")
    base = { 4 };
  else if (element == "N")
    base = { 3 };
  else if (element == "O")
    base = { 2 };
  else if (element == "P")
    base = { 3, 5 };
  else if (element == "S")
    base = { 2, 4, 6 };
  else if (element == "F" || element == "Cl" || element == "Br"
           || element == "I")
    base = { 1 };
  else
    return {};

  if (charge == 0)
    return base;

  std::vector<int> out;
  if (element == "C") {
    // Carbocation and carbanion both lose one bond per unit charge.
    out.push_back(4 - std::abs(charge));
  } else if (element == "B") {
    out.push_back(3 - charge);
  } else {
    // Electron-rich elements: positive charge adds a bonding pair.
    for (int v: base)
      out.push_back(v + charge);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](int v) { return v < 0; }),
            out.end());
  return out;
}

namespace {

struct BondSums {
  int non_aromatic = 0;
  int aromatic_bonds = 0;
};

BondSums bond_sums(const MolecularGraph &g, int atom) {
  BondSums s;
  for (const auto &[nb, order]: g.neighbors(atom)) {
    if (order == BondOrder::kAromatic)
      ++s.aromatic_bonds;
    else
      s.non_aromatic += static_cast<int>(order);
  }
  return s;
}

}  // namespace

int rounded_bond_order_sum(const MolecularGraph &g, int atom) {
  BondSums s = bond_sums(g, atom);
  return s.non_aromatic + (3 * s.aromatic_bonds) / 2;
}

int hydrogen_count(const MolecularGraph &g, int atom) {
  const Atom &a = g.atoms()[atom];
  if (a.bracket)
    return a.explicit_h;
  if (a.element == "*")
    return 0;
  int sum = rounded_bond_order_sum(g, atom);
  for (int v: permitted_valences(a.element, 0))
    if (v >= sum)
      return v - sum;
  return 0;
}

namespace {

void check_valence(const MolecularGraph &g, ValidityReport &report) {
  for (int i = 0; i < g.num_atoms(); ++i) {
    const Atom &a = g.atoms()[i];
    if (a.element == "*")
      continue;
    auto permitted = permitted_valences(a.element, a.charge);
    if (permitted.empty()) {
      if (a.bracket)
        continue;
      // Unreachable for tokenizer output; organic subset is always tabled.
      continue;
    }
    BondSums s = bond_sums(g, i);
    // Each aromatic atom carries at most one double bond among its aromatic
    // bonds, so the aromatic contribution lies in [k, k + 1].
    int lo = s.non_aromatic + s.aromatic_bonds + (a.bracket ? a.explicit_h : 0);
    int hi = a.bracket ? lo + (s.aromatic_bonds > 0 ? 1 : 0)
                       : std::numeric_limits<int>::max();
    bool ok = std::any_of(permitted.begin(), permitted.end(),
                          [&](int v) { return v >= lo && v <= hi; });
    if (!ok) {
      std::ostringstream msg;
      msg << "atom " << (a.aromatic ? "aromatic " : "") << a.element;
      if (a.charge != 0)
        msg << " (charge " << a.charge << ")";
      msg << " has valence " << rounded_bond_order_sum(g, i)
                                    + (a.bracket ? a.explicit_h : 0)
          << "; permitted";
      for (int v: permitted)
        msg << ' ' << v;
      report.diagnostics.push_back(
          { DiagnosticKind::kValenceError, a.token_pos, msg.str() });
    }
  }
  report.valid = report.diagnostics.empty();
}

}  // namespace

ValidityReport validate(std::span<const std::string> tokens) {
  ParseResult result = parse(tokens);
  if (auto *report = std::get_if<ValidityReport>(&result))
    return std::move(*report);
  ValidityReport report;
  check_valence(std::get<MolecularGraph>(result), report);
  return report;
}

ValidityReport validate(const TokenSequence &seq, const Vocabulary &vocab) {
  auto tokens = payload_strings(seq, vocab);
  return validate(tokens);
}

ValidityReport validate_smiles(std::string_view smiles) {
  std::vector<std::string> tokens;
  try {
    tokens = split_tokens(smiles);
  } catch (const TokenizeError &e) {
    ValidityReport report;
    report.valid = false;
    report.diagnostics.push_back(
        { DiagnosticKind::kSyntaxError, 0, e.what() });
    return report;
  }
  return validate(tokens);
}

std::optional<MolecularGraph> molecule_from_smiles(std::string_view smiles) {
  std::vector<std::string> tokens;
  try {
    tokens = split_tokens(smiles);
  } catch (const TokenizeError &) {
    return std::nullopt;
  }
  ParseResult result = parse(tokens);
  auto *graph = std::get_if<MolecularGraph>(&result);
  if (graph == nullptr)
    return std::nullopt;
  ValidityReport report;
  check_valence(*graph, report);
  if (!report.valid)
    return std::nullopt;
  return std::move(*graph);
}

// ---------------------------------------------------------------------------
// Corruption

TokenSequence corrupt(const TokenSequence &seq, const Vocabulary &vocab,
                      const CorruptParams &params, Rng &rng) {
  if (params.apply_probability < 0.0 || params.apply_probability > 1.0)
    throw InvalidArgument("corruption probability must lie in [0, 1]");
  if (params.max_edits < 1)
    throw InvalidArgument("max_edits must be positive");
  if (!rng.bernoulli(params.apply_probability))
    return seq;

  const int n = seq.length();
  std::vector<TokenId> payload(seq.payload().begin(), seq.payload().end());

  auto class_of = [&](TokenId id) {
    return classify_token(vocab.token(id));
  };

  std::vector<TokenId> digits;
  for (TokenId id = kNumSpecials; id < vocab.size(); ++id) {
    const auto &tok = vocab.token(id);
    if (tok.size() == 1 && tok[0] >= '1' && tok[0] <= '9')
      digits.push_back(id);
  }
  if (digits.empty())
    for (TokenId id = kNumSpecials; id < vocab.size(); ++id)
      if (class_of(id) == TokenClass::kRingBond)
        digits.push_back(id);

  const TokenId open_id = vocab.contains("(") ? vocab.id("(") : kUnk;
  const TokenId close_id = vocab.contains(")") ? vocab.id(")") : kUnk;

  auto positions_of = [&](auto pred) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(payload.size()); ++i)
      if (pred(class_of(payload[i])))
        out.push_back(i);
    return out;
  };
  auto is_paren = [](TokenClass c) {
    return c == TokenClass::kOpenBranch || c == TokenClass::kCloseBranch;
  };
  auto is_ring = [](TokenClass c) { return c == TokenClass::kRingBond; };

  auto k = rng.uniform_int(1, params.max_edits);
  for (std::int64_t e = 0; e < k; ++e) {
    auto parens = positions_of(is_paren);
    auto ring_pos = positions_of(is_ring);

    std::vector<CorruptEdit> applicable;
    if (open_id != kUnk)
      applicable.push_back(CorruptEdit::kInsertOpen);
    if (close_id != kUnk)
      applicable.push_back(CorruptEdit::kInsertClose);
    if (!digits.empty())
      applicable.push_back(CorruptEdit::kInsertRingDigit);
    if (!parens.empty())
      applicable.push_back(CorruptEdit::kDeleteParenthesis);
    if (!ring_pos.empty())
      applicable.push_back(CorruptEdit::kDeleteRingDigit);
    if (applicable.empty())
      break;

    auto pick = [&rng](const auto &v) {
      return v[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
    };

    CorruptEdit edit = pick(applicable);
    switch (edit) {
      case CorruptEdit::kInsertOpen:
      case CorruptEdit::kInsertClose:
      case CorruptEdit::kInsertRingDigit: {
        TokenId tok = edit == CorruptEdit::kInsertOpen    ? open_id
                      : edit == CorruptEdit::kInsertClose ? close_id
                                                          : pick(digits);
        auto at = rng.uniform_int(0, static_cast<std::int64_t>(payload.size()));
        if (static_cast<int>(payload.size()) + 3 > n)
          break;  // would overflow n: no-op
        payload.insert(payload.begin() + at, tok);
        break;
      }
      case CorruptEdit::kDeleteParenthesis:
        payload.erase(payload.begin() + pick(parens));
        break;
      case CorruptEdit::kDeleteRingDigit:
        payload.erase(payload.begin() + pick(ring_pos));
        break;
    }
  }
  return TokenSequence::from_payload(payload, n);
}

TokenSequence corrupt(const TokenSequence &seq, const Vocabulary &vocab,
                      const CorruptParams &params) {
  Rng rng(params.seed);
  return corrupt(seq, vocab, params, rng);
}

// ---------------------------------------------------------------------------
// Fingerprints

Fingerprint::Fingerprint(int nbits, int radius)
    : nbits_(nbits), radius_(radius),
      words_((static_cast<std::size_t>(nbits) + 63) / 64, 0) {
  if (nbits <= 0)
    throw InvalidArgument("fingerprint size must be positive");
  if (radius < 0)
    throw InvalidArgument("fingerprint radius must be non-negative");
}

void Fingerprint::set(std::uint64_t bit) {
  bit %= static_cast<std::uint64_t>(nbits_);
  words_[bit / 64] |= std::uint64_t { 1 } << (bit % 64);
}

bool Fingerprint::test(std::uint64_t bit) const {
  bit %= static_cast<std::uint64_t>(nbits_);
  return (words_[bit / 64] >> (bit % 64)) & 1U;
}

int Fingerprint::popcount() const {
  int total = 0;
  for (auto w: words_)
    total += std::popcount(w);
  return total;
}

namespace {

// FNV-1a over 64-bit words with a splitmix finalizer.
class StableHash {
 public:
  StableHash &add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  StableHash &add(std::string_view s) {
    add(s.size());
    for (char c: s) {
      state_ ^= static_cast<unsigned char>(c);
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  std::uint64_t value() const { return Rng::splitmix(state_); }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace

Fingerprint morgan_fingerprint(const MolecularGraph &g, int radius,
                               int nbits) {
  Fingerprint fp(nbits, radius);
  const int na = g.num_atoms();
  std::vector<std::uint64_t> codes(na);
  for (int i = 0; i < na; ++i) {
    const Atom &a = g.atoms()[i];
    codes[i] = StableHash()
                   .add(a.element)
                   .add(static_cast<std::uint64_t>(a.charge + 128))
                   .add(a.aromatic ? 1 : 0)
                   .add(static_cast<std::uint64_t>(g.degree(i)))
                   .add(static_cast<std::uint64_t>(hydrogen_count(g, i)))
                   .value();
    fp.set(codes[i]);
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(na);
    for (int i = 0; i < na; ++i) {
      env.clear();
      for (const auto &[nb, order]: g.neighbors(i))
        env.emplace_back(static_cast<std::uint64_t>(order), codes[nb]);
      std::sort(env.begin(), env.end());
      StableHash h;
      h.add(static_cast<std::uint64_t>(r)).add(codes[i]);
      for (const auto &[o, c]: env)
        h.add(o).add(c);
      next[i] = h.value();
      fp.set(next[i]);
    }
    codes = std::move(next);
  }
  return fp;
}

double tanimoto(const Fingerprint &a, const Fingerprint &b) {
  if (a.nbits() != b.nbits())
    throw SizeMismatch("fingerprint sizes differ: " + std::to_string(a.nbits())
                       + " vs " + std::to_string(b.nbits()));
  int both = 0, either = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    both += std::popcount(a.words()[i] & b.words()[i]);
    either += std::popcount(a.words()[i] | b.words()[i]);
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / either;
}

}  // namespace smidiff
