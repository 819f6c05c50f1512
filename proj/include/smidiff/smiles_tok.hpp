//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_SMILES_TOK_HPP_
#define SMIDIFF_SMILES_TOK_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace smidiff {

using TokenId = std::int32_t;

inline constexpr std::string_view kSosToken = "[SOS]";
inline constexpr std::string_view kEosToken = "[EOS]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";

inline constexpr TokenId kSos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kPad = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr int kNumSpecials = 4;

enum class TokenClass {
  kSpecial,
  kAtom,       // organic-subset, aromatic, bracket atom or '*'
  kBond,       // - = # : / and backslash
  kOpenBranch,
  kCloseBranch,
  kRingBond,   // 0-9 or %nn
  kDot,
};

TokenClass classify_token(std::string_view token);

inline bool is_structural_token(std::string_view token) {
  TokenClass c = classify_token(token);
  return c == TokenClass::kOpenBranch || c == TokenClass::kCloseBranch
         || c == TokenClass::kRingBond;
}

// Maximal-munch scan of a SMILES string into token strings. Bracket atoms,
// two-letter halogens and %nn ring bonds are single tokens. Throws
// TokenizeError on an unterminated bracket or an illegal character.
std::vector<std::string> split_tokens(std::string_view smiles);

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  // `tokens` must start with the four specials in canonical order.
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId add(std::string_view token);

  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string &token(TokenId id) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string> &tokens() const { return tokens_; }

  // One token per line, line number = id.
  void write(std::ostream &os) const;
  static Vocabulary read(std::istream &is);
  void save(const std::string &path) const;
  static Vocabulary load(const std::string &path);

  bool operator==(const Vocabulary &other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Specials first, then corpus tokens in first-seen order.
Vocabulary build_vocab(std::span<const std::string> corpus);

// Fixed-length padded sequence: [SOS] payload [EOS] [PAD]...
class TokenSequence {
 public:
  TokenSequence() = default;

  // Checks the [SOS]/[EOS]/[PAD] layout; throws FormatError.
  static TokenSequence from_ids(std::vector<TokenId> ids);

  // Wraps a payload as [SOS] payload [EOS] and pads to n.
  static TokenSequence from_payload(std::span<const TokenId> payload, int n);

  const std::vector<TokenId> &ids() const { return ids_; }
  int length() const { return static_cast<int>(ids_.size()); }
  int effective_len() const { return eos_ + 1; }
  std::span<const TokenId> payload() const {
    return std::span<const TokenId>(ids_).subspan(1, eos_ - 1);
  }

  bool operator==(const TokenSequence &other) const = default;

 private:
  std::vector<TokenId> ids_;
  int eos_ = 0;
};

// Checks the layout invariant without throwing.
bool is_well_formed(std::span<const TokenId> ids);

// Throws TokenizeError / LengthError. Tokens absent from `vocab` map to
// [UNK].
TokenSequence tokenize(std::string_view smiles, const Vocabulary &vocab,
                       int n);

std::string detokenize(const TokenSequence &seq, const Vocabulary &vocab);
// Raw ids; throws FormatError if the layout invariant is violated.
std::string detokenize(std::span<const TokenId> ids, const Vocabulary &vocab);

// Token strings of the payload.
std::vector<std::string> payload_tokens(const TokenSequence &seq,
                                        const Vocabulary &vocab);

}  // namespace smidiff

#endif  // SMIDIFF_SMILES_TOK_HPP_
