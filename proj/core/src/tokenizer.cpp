#include "gcst/tokenizer.hpp"

#include <cctype>

#include "gcst/error.hpp"

namespace gcst {

std::vector<std::string> Tokenizer::split_lower(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) {
        words.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) {
    words.push_back(current);
  }
  return words;
}

Tokenizer::Tokenizer(const std::vector<std::string>& texts,
                     std::size_t max_length)
    : max_length_(max_length) {
  if (max_length_ == 0) {
    throw_invalid("tokenizer: max_length must be positive");
  }
  int next = 1;  // 0 is unk
  for (const auto& text : texts) {
    for (const auto& word : split_lower(text)) {
      if (vocabulary_.emplace(word, next).second) {
        ++next;
      }
    }
  }
  vocab_size_ = static_cast<std::size_t>(next);
}

std::vector<int> Tokenizer::tokenize(const std::string& text) const {
  std::vector<int> tokens;
  for (const auto& word : split_lower(text)) {
    if (tokens.size() >= max_length_) {
      break;
    }
    tokens.push_back(index_of(word));
  }
  return tokens;
}

int Tokenizer::index_of(const std::string& word) const {
  auto it = vocabulary_.find(word);
  return it == vocabulary_.end() ? kUnkIndex : it->second;
}

}  // namespace gcst
