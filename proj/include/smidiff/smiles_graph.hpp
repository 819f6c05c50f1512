//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_SMILES_GRAPH_HPP_
#define SMIDIFF_SMILES_GRAPH_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smidiff/rng.hpp"
#include "smidiff/smiles_tok.hpp"

namespace smidiff {

enum class BondOrder : std::uint8_t {
  kSingle = 1,
  kDouble = 2,
  kTriple = 3,
  kAromatic = 4,
};

struct Atom {
  std::string element;  // capitalized symbol, "*" for the wildcard
  bool aromatic = false;
  bool bracket = false;
  int charge = 0;
  int explicit_h = 0;  // bracket atoms only
  int token_pos = 0;   // payload position of the atom token
};

struct Bond {
  int begin;
  int end;
  BondOrder order;
};

class MolecularGraph {
 public:
  int add_atom(Atom atom);

  // Throws InvalidArgument for self-bonds, duplicates or bad indices.
  void add_bond(int a, int b, BondOrder order);

  bool has_bond(int a, int b) const;

  const std::vector<Atom> &atoms() const { return atoms_; }
  const std::vector<Bond> &bonds() const { return bonds_; }
  int num_atoms() const { return static_cast<int>(atoms_.size()); }

  // (neighbor, order) pairs.
  const std::vector<std::pair<int, BondOrder>> &neighbors(int atom) const {
    return adjacency_[atom];
  }

  int degree(int atom) const {
    return static_cast<int>(adjacency_[atom].size());
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<std::pair<int, BondOrder>>> adjacency_;
};

enum class DiagnosticKind {
  kUnclosedRing,
  kUnmatchedParenthesis,
  kValenceError,
  kSyntaxError,
};

std::string_view to_string(DiagnosticKind kind);

struct Diagnostic {
  DiagnosticKind kind;
  int position;  // payload token index
  std::string message;
};

struct ValidityReport {
  bool valid = true;
  std::vector<Diagnostic> diagnostics;

  bool has(DiagnosticKind kind) const;

  // "POS KIND MESSAGE", one line per diagnostic.
  std::string render() const;
};

using ParseResult = std::variant<MolecularGraph, ValidityReport>;

// Structural parse over payload token strings (no specials).
ParseResult parse(std::span<const std::string> tokens);
ParseResult parse(const TokenSequence &seq, const Vocabulary &vocab);

// Structural parse followed by the valence check.
ValidityReport validate(std::span<const std::string> tokens);
ValidityReport validate(const TokenSequence &seq, const Vocabulary &vocab);
// Tokenizes first; untokenizable strings are SyntaxErrors at position 0.
ValidityReport validate_smiles(std::string_view smiles);

// Permitted total valences for an element at a given formal charge. Empty
// when the element is outside the table (accepted permissively).
std::vector<int> permitted_valences(std::string_view element, int charge);

// Bond-order sum with aromatic bonds at 1.5 each, rounded half down.
int rounded_bond_order_sum(const MolecularGraph &g, int atom);

// Implicit hydrogens for organic-subset atoms, explicit count otherwise.
int hydrogen_count(const MolecularGraph &g, int atom);

// Convenience for metrics: graph of a SMILES string or nullopt if invalid.
std::optional<MolecularGraph> molecule_from_smiles(std::string_view smiles);

struct CorruptParams {
  double apply_probability = 0.4;
  int max_edits = 3;
  std::uint64_t seed = 0;
};

enum class CorruptEdit {
  kInsertOpen,
  kInsertClose,
  kInsertRingDigit,
  kDeleteParenthesis,
  kDeleteRingDigit,
};

// With probability p applies Uniform{1..max_edits} structural edits, each
// drawn uniformly among the applicable kinds. Atom and bond tokens are never
// touched. Insertions that would overflow the sequence length are skipped.
TokenSequence corrupt(const TokenSequence &seq, const Vocabulary &vocab,
                      const CorruptParams &params, Rng &rng);
TokenSequence corrupt(const TokenSequence &seq, const Vocabulary &vocab,
                      const CorruptParams &params);

class Fingerprint {
 public:
  explicit Fingerprint(int nbits = 2048, int radius = 2);

  void set(std::uint64_t bit);
  bool test(std::uint64_t bit) const;
  int popcount() const;
  int nbits() const { return nbits_; }
  int radius() const { return radius_; }
  const std::vector<std::uint64_t> &words() const { return words_; }

  bool operator==(const Fingerprint &other) const = default;

 private:
  int nbits_;
  int radius_;
  std::vector<std::uint64_t> words_;
};

Fingerprint morgan_fingerprint(const MolecularGraph &g, int radius = 2,
                               int nbits = 2048);

// |a & b| / |a | b|, 0 when both are empty. Throws SizeMismatch.
double tanimoto(const Fingerprint &a, const Fingerprint &b);

}  // namespace smidiff

#endif  // SMIDIFF_SMILES_GRAPH_HPP_
