//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/smiles_tok.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <utility>

#include "smidiff/errors.hpp"

namespace smidiff {

namespace {

bool is_organic(char c) {
  switch (c) {
    case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F':
    case 'I': case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
    case '*':
      return true;
    default:
      return false;
  }
}

bool is_bond(char c) {
  switch (c) {
    case '-': case '=': case '#': case ':': case '/': case '\\':
      return true;
    default:
      return false;
  }
}

bool is_digit(char c) {
  return c >= '0' && c <= '9';
}

}  // namespace

TokenClass classify_token(std::string_view token) {
  if (token.empty())
    return TokenClass::kSpecial;
  if (token.size() > 2 && token.front() == '[' && token.back() == ']') {
    if (token == kSosToken || token == kEosToken || token == kPadToken
        || token == kUnkToken)
      return TokenClass::kSpecial;
    return TokenClass::kAtom;
  }
  if (token == "Cl" || token == "Br")
    return TokenClass::kAtom;
  if (token.size() == 3 && token[0] == '%')
    return TokenClass::kRingBond;
  if (token.size() != 1)
    return TokenClass::kSpecial;

  char c = token[0];
  if (is_organic(c))
    return TokenClass::kAtom;
  if (is_bond(c))
    return TokenClass::kBond;
  if (is_digit(c))
    return TokenClass::kRingBond;
  if (c == '(')
    return TokenClass::kOpenBranch;
  if (c == ')')
    return TokenClass::kCloseBranch;
  if (c == '.')
    return TokenClass::kDot;
  return TokenClass::kSpecial;
}

std::vector<std::string> split_tokens(std::string_view smiles) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < smiles.size()) {
    char c = smiles[i];
    if (c == '[') {
      std::size_t close = smiles.find_first_of("[]", i + 1);
      if (close == std::string_view::npos || smiles[close] != ']')
        throw TokenizeError("unterminated bracket atom at position "
                            + std::to_string(i));
      if (close == i + 1)
        throw TokenizeError("empty bracket atom at position "
                            + std::to_string(i));
      out.emplace_back(smiles.substr(i, close - i + 1));
      i = close + 1;
      continue;
    }
    if (c == 'C' && i + 1 < smiles.size() && smiles[i + 1] == 'l') {
      out.emplace_back("Cl");
      i += 2;
      continue;
    }
    if (c == 'B' && i + 1 < smiles.size() && smiles[i + 1] == 'r') {
      out.emplace_back("Br");
      i += 2;
      continue;
    }
    if (c == '%') {
      if (i + 2 >= smiles.size() || !is_digit(smiles[i + 1])
          || !is_digit(smiles[i + 2]))
        throw TokenizeError("malformed %nn ring bond at position "
                            + std::to_string(i));
      out.emplace_back(smiles.substr(i, 3));
      i += 3;
      continue;
    }
    if (is_organic(c) || is_bond(c) || is_digit(c) || c == '(' || c == ')'
        || c == '.') {
      out.emplace_back(1, c);
      ++i;
      continue;
    }
    throw TokenizeError(std::string("illegal character '") + c
                        + "' at position " + std::to_string(i));
  }
  return out;
}

Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string> {
        std::string(kSosToken), std::string(kEosToken),
        std::string(kPadToken), std::string(kUnkToken) }) { }

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials || tokens_[kSos] != kSosToken
      || tokens_[kEos] != kEosToken || tokens_[kPad] != kPadToken
      || tokens_[kUnk] != kUnkToken)
    throw FormatError("vocabulary must start with [SOS] [EOS] [PAD] [UNK]");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] =
        index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted)
      throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

TokenId Vocabulary::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end())
    return it->second;
  auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

const std::string &Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size())
    throw IdOutOfRange("token id " + std::to_string(id)
                       + " outside vocabulary of size "
                       + std::to_string(size()));
  return tokens_[id];
}

void Vocabulary::write(std::ostream &os) const {
  for (const auto &t: tokens_)
    os << t << '\n';
}

Vocabulary Vocabulary::read(std::istream &is) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string &path) const {
  std::ofstream os(path);
  if (!os)
    throw FileError("cannot open '" + path + "' for writing");
  write(os);
}

Vocabulary Vocabulary::load(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw FileError("cannot open '" + path + "'");
  return read(is);
}

Vocabulary build_vocab(std::span<const std::string> corpus) {
  Vocabulary vocab;
  for (const auto &smiles: corpus)
    for (const auto &tok: split_tokens(smiles))
      vocab.add(tok);
  return vocab;
}

bool is_well_formed(std::span<const TokenId> ids) {
  if (ids.size() < 2 || ids[0] != kSos)
    return false;
  std::size_t i = 1;
  for (; i < ids.size() && ids[i] != kEos; ++i)
    if (ids[i] == kSos || ids[i] == kPad)
      return false;
  if (i == ids.size())
    return false;
  for (++i; i < ids.size(); ++i)
    if (ids[i] != kPad)
      return false;
  return true;
}

TokenSequence TokenSequence::from_ids(std::vector<TokenId> ids) {
  if (!is_well_formed(ids))
    throw FormatError("token ids violate the [SOS] payload [EOS] [PAD]... "
                      "layout");
  TokenSequence seq;
  seq.eos_ = static_cast<int>(
      std::find(ids.begin(), ids.end(), kEos) - ids.begin());
  seq.ids_ = std::move(ids);
  return seq;
}

TokenSequence TokenSequence::from_payload(std::span<const TokenId> payload,
                                          int n) {
  if (static_cast<int>(payload.size()) + 2 > n)
    throw LengthError("payload of " + std::to_string(payload.size())
                      + " tokens does not fit in length "
                      + std::to_string(n));
  std::vector<TokenId> ids(n, kPad);
  ids[0] = kSos;
  std::copy(payload.begin(), payload.end(), ids.begin() + 1);
  ids[payload.size() + 1] = kEos;
  return from_ids(std::move(ids));
}

TokenSequence tokenize(std::string_view smiles, const Vocabulary &vocab,
                       int n) {
  if (smiles.empty())
    throw TokenizeError("empty SMILES string");
  auto tokens = split_tokens(smiles);
  if (static_cast<int>(tokens.size()) + 2 > n)
    throw LengthError("SMILES has " + std::to_string(tokens.size())
                      + " tokens; maximum for n=" + std::to_string(n) + " is "
                      + std::to_string(n - 2));
  std::vector<TokenId> payload;
  payload.reserve(tokens.size());
  for (const auto &t: tokens)
    payload.push_back(vocab.id(t));
  return TokenSequence::from_payload(payload, n);
}

std::string detokenize(const TokenSequence &seq, const Vocabulary &vocab) {
  std::string out;
  for (TokenId id: seq.payload())
    out += vocab.token(id);
  return out;
}

std::string detokenize(std::span<const TokenId> ids,
                       const Vocabulary &vocab) {
  if (!is_well_formed(ids))
    throw FormatError("token ids violate the [SOS] payload [EOS] [PAD]... "
                      "layout");
  return detokenize(
      TokenSequence::from_ids(std::vector<TokenId>(ids.begin(), ids.end())),
      vocab);
}

std::vector<std::string> payload_tokens(const TokenSequence &seq,
                                        const Vocabulary &vocab) {
  std::vector<std::string> out;
  for (TokenId id: seq.payload())
    out.push_back(vocab.token(id));
  return out;
}

}  // namespace smidiff
