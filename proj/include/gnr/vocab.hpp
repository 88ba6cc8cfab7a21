#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gnr::textenc {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;

using TokenSeq = std::vector<int>;

// Token <-> index map. Index 0 is PAD, index 1 is UNK.
class Vocabulary {
 public:
  Vocabulary();

  // Tokens of `texts` occurring at least `min_freq` times, ordered by
  // descending frequency then lexicographically.
  static Vocabulary build(const std::vector<std::string>& texts, std::size_t min_freq);

  // Rebuilds from a full token list (PAD and UNK must come first).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int add(const std::string& token);
  int index(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Lowercases, splits on whitespace/punctuation, maps unknown words to UNK and
// truncates or right-pads with PAD to exactly `max_len` entries.
TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

}  // namespace gnr::textenc
