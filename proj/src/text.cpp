//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/text.hpp"

#include <cctype>

#include "smidiff/errors.hpp"

namespace smidiff {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c: text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty())
    out.push_back(std::move(cur));
  return out;
}

TextVocabulary::TextVocabulary(): TextVocabulary({ "[PAD]", "[UNK]" }) { }

TextVocabulary::TextVocabulary(std::vector<std::string> words)
    : words_(std::move(words)) {
  if (words_.size() < 2 || words_[0] != "[PAD]" || words_[1] != "[UNK]")
    throw FormatError("text vocabulary must start with [PAD] [UNK]");
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (!index_.emplace(words_[i], static_cast<std::int32_t>(i)).second)
      throw FormatError("duplicate word '" + words_[i]
                        + "' in text vocabulary");
}

std::int32_t TextVocabulary::add(std::string_view word) {
  auto it = index_.find(std::string(word));
  if (it != index_.end())
    return it->second;
  auto id = static_cast<std::int32_t>(words_.size());
  words_.emplace_back(word);
  index_.emplace(words_.back(), id);
  return id;
}

std::int32_t TextVocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkWord : it->second;
}

std::vector<std::int32_t> TextVocabulary::encode(std::string_view text,
                                                 int max_len) const {
  auto words = split_words(text);
  if (words.empty())
    throw EmptyText("description contains no words");
  if (static_cast<int>(words.size()) > max_len)
    words.resize(max_len);
  std::vector<std::int32_t> ids;
  ids.reserve(words.size());
  for (const auto &w: words)
    ids.push_back(id(w));
  return ids;
}

TextVocabulary build_text_vocab(std::span<const std::string> descriptions) {
  TextVocabulary vocab;
  for (const auto &d: descriptions)
    for (const auto &w: split_words(d))
      vocab.add(w);
  return vocab;
}

}  // namespace smidiff
