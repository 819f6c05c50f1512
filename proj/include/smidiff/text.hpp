//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_TEXT_HPP_
#define SMIDIFF_TEXT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace smidiff {

// Lowercased alphanumeric runs; whitespace and punctuation separate words.
std::vector<std::string> split_words(std::string_view text);

// Word-level vocabulary for descriptions. Id 0 is [PAD], id 1 is [UNK].
class TextVocabulary {
 public:
  static constexpr std::int32_t kPadWord = 0;
  static constexpr std::int32_t kUnkWord = 1;

  TextVocabulary();
  explicit TextVocabulary(std::vector<std::string> words);

  std::int32_t add(std::string_view word);
  std::int32_t id(std::string_view word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string> &words() const { return words_; }

  // Throws EmptyText when the description has no words. Truncates to
  // max_len.
  std::vector<std::int32_t> encode(std::string_view text, int max_len) const;

  bool operator==(const TextVocabulary &other) const {
    return words_ == other.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

TextVocabulary build_text_vocab(std::span<const std::string> descriptions);

}  // namespace smidiff

#endif  // SMIDIFF_TEXT_HPP_
