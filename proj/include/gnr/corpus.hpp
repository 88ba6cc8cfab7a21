#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gnr::corpus {

struct NewsArticle {
  std::string id;
  std::string category;
  std::string title;
  std::string abstract;
  // Set only after theme annotation; 1-3 short phrases.
  std::optional<std::vector<std::string>> theme_topics;

  bool operator==(const NewsArticle&) const = default;
};

struct Candidate {
  std::string news_id;
  bool clicked = false;

  bool operator==(const Candidate&) const = default;
};

struct Impression {
  std::string impression_id;
  std::string user_id;
  std::string timestamp;
  std::vector<std::string> history;
  std::vector<Candidate> candidates;

  bool operator==(const Impression&) const = default;
};

struct RelationPair {
  std::string anchor;
  std::string related;
};

struct RelationPairSet {
  std::vector<RelationPair> pairs;
  std::filesystem::path source;
};

// Immutable-after-load article index; insertion order is preserved.
class CorpusStore {
 public:
  void add(NewsArticle article);

  const NewsArticle& at(const std::string& id) const;
  const NewsArticle* find(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  const std::vector<NewsArticle>& articles() const { return articles_; }
  std::vector<std::string> ids() const;
  std::size_t size() const { return articles_.size(); }
  bool empty() const { return articles_.empty(); }

  // Copy with theme topics attached; ids missing from `themes` keep their current value.
  CorpusStore with_themes(const std::map<std::string, std::vector<std::string>>& themes) const;

 private:
  std::vector<NewsArticle> articles_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::size_t kUnboundedHistory = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kMaxThemeTopics = 3;
inline constexpr std::size_t kMaxTopicWords = 5;

// `id<TAB>category<TAB>title<TAB>abstract[<TAB>ignored...]`
CorpusStore load_news(const std::filesystem::path& path);
void write_news(const CorpusStore& store, const std::filesystem::path& path);

// `impression_id<TAB>user_id<TAB>timestamp<TAB>history ids<TAB>candidates with -1/-0 suffix`
std::vector<Impression> load_behaviors(const std::filesystem::path& path, const CorpusStore& store);
void write_behaviors(const std::vector<Impression>& imps, const std::filesystem::path& path);

// Keeps impressions with min_h <= |history| <= max_h whose history and
// candidate articles all carry `category`; an empty category matches all.
std::vector<Impression> filter_impressions(const std::vector<Impression>& imps, std::size_t min_h,
                                           std::size_t max_h, const std::string& category,
                                           const CorpusStore& store);

// `anchor_id<TAB>related_id`
RelationPairSet load_relation_pairs(const std::filesystem::path& path, const CorpusStore& store);

// Theme sidecar: `id<TAB>topic1|topic2|topic3`.
std::map<std::string, std::vector<std::string>> load_themes(const std::filesystem::path& path,
                                                            const CorpusStore& store);
void write_themes(const std::map<std::string, std::vector<std::string>>& themes,
                  const std::filesystem::path& path);

// Reads a whole file, rejecting invalid UTF-8.
std::string read_utf8_file(const std::filesystem::path& path);

}  // namespace gnr::corpus
