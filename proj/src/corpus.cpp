#include "gnr/corpus.hpp"

#include "gnr/common.hpp"
#include "gnr/text_util.hpp"

#include <fstream>
#include <sstream>

namespace gnr::corpus {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

// Splits file content into LF lines, tolerating a trailing CR and a final
// newline. Blank lines are reported as empty strings so numbering stays exact.
std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> lines;
  if (content.empty()) return lines;
  lines = text::split(content, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

std::vector<std::string> split_ws(const std::string& field) {
  std::vector<std::string> out;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void check_writable_field(const std::string& value, const std::string& what) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    throw DataError(what + " contains a tab or newline and cannot be written");
  }
}

}  // namespace

void CorpusStore::add(NewsArticle article) {
  if (article.id.empty()) throw DataError("article id is empty");
  if (article.title.empty()) throw DataError("article " + article.id + " has an empty title");
  if (index_.count(article.id) > 0) throw DataError("duplicate article id " + article.id);
  if (article.theme_topics && (article.theme_topics->empty() || article.theme_topics->size() > kMaxThemeTopics)) {
    throw DataError("article " + article.id + " must have 1-3 theme topics");
  }
  index_.emplace(article.id, articles_.size());
  articles_.push_back(std::move(article));
}

const NewsArticle& CorpusStore::at(const std::string& id) const {
  const auto* a = find(id);
  if (a == nullptr) throw DataError("unknown news id " + id);
  return *a;
}

const NewsArticle* CorpusStore::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &articles_[it->second];
}

std::vector<std::string> CorpusStore::ids() const {
  std::vector<std::string> out;
  out.reserve(articles_.size());
  for (const auto& a : articles_) out.push_back(a.id);
  return out;
}

CorpusStore CorpusStore::with_themes(const std::map<std::string, std::vector<std::string>>& themes) const {
  CorpusStore out;
  for (auto a : articles_) {
    if (auto it = themes.find(a.id); it != themes.end()) a.theme_topics = it->second;
    out.add(std::move(a));
  }
  return out;
}

std::string read_utf8_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string content = buf.str();
  if (!text::is_valid_utf8(content)) throw DataError(path.string() + " is not valid UTF-8");
  return content;
}

CorpusStore load_news(const std::filesystem::path& path) {
  const auto lines = lines_of(read_utf8_file(path));
  CorpusStore store;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cols = text::split(lines[i], '\t');
    if (cols.size() < 4) {
      throw DataError(where(path, i + 1) + ": expected at least 4 tab-separated columns, got " +
                      std::to_string(cols.size()));
    }
    NewsArticle a{cols[0], cols[1], cols[2], cols[3], std::nullopt};
    if (store.contains(a.id)) throw DataError(where(path, i + 1) + ": duplicate article id " + a.id);
    try {
      store.add(std::move(a));
    } catch (const DataError& e) {
      throw DataError(where(path, i + 1) + ": " + e.what());
    }
  }
  return store;
}

void write_news(const CorpusStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& a : store.articles()) {
    for (const auto* f : {&a.id, &a.category, &a.title, &a.abstract}) check_writable_field(*f, "article " + a.id);
    out << a.id << '\t' << a.category << '\t' << a.title << '\t' << a.abstract << '\n';
  }
}

std::vector<Impression> load_behaviors(const std::filesystem::path& path, const CorpusStore& store) {
  const auto lines = lines_of(read_utf8_file(path));
  std::vector<Impression> imps;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cols = text::split(lines[i], '\t');
    if (cols.size() != 5) {
      throw DataError(where(path, i + 1) + ": expected 5 tab-separated columns, got " + std::to_string(cols.size()));
    }
    Impression imp{cols[0], cols[1], cols[2], split_ws(cols[3]), {}};
    for (const auto& id : imp.history) {
      if (!store.contains(id)) throw DataError(where(path, i + 1) + ": unknown history news id " + id);
    }
    for (const auto& tok : split_ws(cols[4])) {
      const auto dash = tok.rfind('-');
      if (dash == std::string::npos || dash + 2 != tok.size() || (tok[dash + 1] != '0' && tok[dash + 1] != '1')) {
        throw DataError(where(path, i + 1) + ": candidate '" + tok + "' lacks a -0/-1 click label");
      }
      Candidate c{tok.substr(0, dash), tok[dash + 1] == '1'};
      if (!store.contains(c.news_id)) {
        throw DataError(where(path, i + 1) + ": unknown candidate news id " + c.news_id);
      }
      imp.candidates.push_back(std::move(c));
    }
    if (imp.candidates.empty()) throw DataError(where(path, i + 1) + ": impression has no candidates");
    imps.push_back(std::move(imp));
  }
  return imps;
}

void write_behaviors(const std::vector<Impression>& imps, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& imp : imps) {
    out << imp.impression_id << '\t' << imp.user_id << '\t' << imp.timestamp << '\t'
        << text::join(imp.history, " ") << '\t';
    for (std::size_t i = 0; i < imp.candidates.size(); ++i) {
      if (i > 0) out << ' ';
      out << imp.candidates[i].news_id << (imp.candidates[i].clicked ? "-1" : "-0");
    }
    out << '\n';
  }
}

std::vector<Impression> filter_impressions(const std::vector<Impression>& imps, std::size_t min_h,
                                           std::size_t max_h, const std::string& category,
                                           const CorpusStore& store) {
  if (min_h > max_h) throw ConfigError("filter_impressions: min_h exceeds max_h");
  auto in_category = [&](const std::string& id) { return category.empty() || store.at(id).category == category; };
  std::vector<Impression> out;
  for (const auto& imp : imps) {
    const std::size_t h = imp.history.size();
    if (h < min_h || h > max_h) continue;
    bool keep = true;
    for (const auto& id : imp.history) keep = keep && in_category(id);
    for (const auto& c : imp.candidates) keep = keep && in_category(c.news_id);
    if (keep) out.push_back(imp);
  }
  return out;
}

RelationPairSet load_relation_pairs(const std::filesystem::path& path, const CorpusStore& store) {
  const auto lines = lines_of(read_utf8_file(path));
  RelationPairSet set;
  set.source = path;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cols = text::split(lines[i], '\t');
    if (cols.size() != 2) {
      throw DataError(where(path, i + 1) + ": expected 2 tab-separated columns, got " + std::to_string(cols.size()));
    }
    if (cols[0] == cols[1]) throw DataError(where(path, i + 1) + ": self-pair " + cols[0]);
    for (const auto& id : cols) {
      if (!store.contains(id)) throw DataError(where(path, i + 1) + ": unknown news id " + id);
    }
    set.pairs.push_back({cols[0], cols[1]});
  }
  return set;
}

std::map<std::string, std::vector<std::string>> load_themes(const std::filesystem::path& path,
                                                            const CorpusStore& store) {
  const auto lines = lines_of(read_utf8_file(path));
  std::map<std::string, std::vector<std::string>> themes;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cols = text::split(lines[i], '\t');
    if (cols.size() != 2) {
      throw DataError(where(path, i + 1) + ": expected 2 tab-separated columns, got " + std::to_string(cols.size()));
    }
    if (!store.contains(cols[0])) throw DataError(where(path, i + 1) + ": unknown news id " + cols[0]);
    std::vector<std::string> topics;
    for (const auto& t : text::split(cols[1], '|')) {
      const auto phrase = text::truncate_words(t, kMaxTopicWords);
      if (!phrase.empty()) topics.push_back(phrase);
    }
    if (topics.empty() || topics.size() > kMaxThemeTopics) {
      throw DataError(where(path, i + 1) + ": expected 1-3 topics for " + cols[0]);
    }
    themes[cols[0]] = std::move(topics);
  }
  return themes;
}

void write_themes(const std::map<std::string, std::vector<std::string>>& themes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [id, topics] : themes) {
    for (const auto& t : topics) {
      if (t.find('|') != std::string::npos) throw DataError("topic for " + id + " contains '|'");
      check_writable_field(t, "topic for " + id);
    }
    out << id << '\t' << text::join(topics, "|") << '\n';
  }
}

}  // namespace gnr::corpus
