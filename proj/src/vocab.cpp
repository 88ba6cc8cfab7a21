#include "gnr/vocab.hpp"

#include "gnr/common.hpp"
#include "gnr/text_util.hpp"

#include <algorithm>
#include <map>

namespace gnr::textenc {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : text::words(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [word, n] : ranked) {
    if (n >= min_freq) v.add(word);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw DataError("vocabulary must start with <pad> and <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw DataError("duplicate vocabulary token " + tokens[i]);
    v.add(tokens[i]);
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const int idx = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  TokenSeq seq;
  seq.reserve(max_len);
  for (const auto& w : text::words(text)) {
    if (seq.size() == max_len) break;
    seq.push_back(vocab.index(w));
  }
  seq.resize(max_len, kPad);
  return seq;
}

}  // namespace gnr::textenc
