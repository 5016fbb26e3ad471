#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace gcst {

/// Lowercase whitespace tokenizer over a corpus-built vocabulary.
/// Index 0 is reserved for out-of-vocabulary words; known words are numbered
/// densely in first-appearance order, so a given corpus always produces the
/// same vocabulary.
class Tokenizer {
 public:
  static constexpr int kUnkIndex = 0;

  Tokenizer() = default;
  explicit Tokenizer(const std::vector<std::string>& texts,
                     std::size_t max_length = 128);

  // Truncates to max_length; never returns an empty sequence for input that
  // contains at least one word.
  std::vector<int> tokenize(const std::string& text) const;

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t max_length() const { return max_length_; }
  int index_of(const std::string& word) const;

  static std::vector<std::string> split_lower(const std::string& text);

 private:
  std::unordered_map<std::string, int> vocabulary_;
  std::size_t vocab_size_ = 1;  // slot 0 = unk
  std::size_t max_length_ = 128;
};

}  // namespace gcst
