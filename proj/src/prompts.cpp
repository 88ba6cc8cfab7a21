#include "gnr/prompts.hpp"

#include "gnr/common.hpp"
#include "gnr/text_util.hpp"

#include <json.hpp>

#include <cctype>
#include <cstring>

namespace gnr::llm {

const char* const kThemeInstruction =
    "Based on the given news information, summarize what topic(s) the news is related to. Each news article is "
    "related to 1-3 topics, and each topic should not exceed five words.\n"
    "Answer in the form: This news is related to [topic], [topic].";

const char* const kProfileInstruction =
    "You are asked to describe user interest based on his/her browsed news list. User interest includes the news "
    "[categories] and news [topics] (under each [category]) that users are interested in.\n"
    "Answer in the form: According to [News 1, News 2], this user is interested in news about [category], "
    "especially [topic, topic].";

const char* const kFusionInstruction =
    "You are a personalized text generator. First, I will provide you with a news list that includes both the "
    "[main news] and [topic-related news]. Second, I will provide you with user interests, including the "
    "[categories] and [topics] of news that the user is interested in. Based on the input news list and user "
    "interests, you are required to generate a {personalized news summary} centered around the [main news].\n"
    "Answer with one record: {\"title\": \"...\", \"category\": \"...\", \"topics\": \"...\", \"abstract\": "
    "\"...\"}";

const char* const kJudgeInstruction =
    "You check whether a news summary is factually consistent with its source articles. A summary is consistent "
    "when every statement in it is supported by at least one source. Answer with a single word: yes or no.";

const char* const kJudgeVersion = "consistency-judge-v1";

const char* const kFormatReminder =
    "Reply with exactly one record of the form {\"title\": \"...\", \"category\": \"...\", \"topics\": \"...\", "
    "\"abstract\": \"...\"} and nothing else.";

std::string Prompt::hash() const {
  std::string buf = system;
  buf.push_back('\0');
  buf += user;
  return text::sha256_hex(buf);
}

std::string render_record(const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out = "{";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ", ";
    out += nlohmann::json(fields[i].first).dump();
    out += ": ";
    out += nlohmann::json(fields[i].second).dump();
  }
  out += "}";
  return out;
}

Prompt render_theme_prompt(const NewsArticle& article) {
  if (article.title.empty()) throw DataError("theme prompt: article " + article.id + " has no title");
  return {kThemeInstruction, render_record({{"title", article.title},
                                            {"abstract", article.abstract},
                                            {"category", article.category}})};
}

Prompt render_profile_prompt(const std::vector<const NewsArticle*>& history) {
  if (history.empty()) throw DataError("profile prompt: empty history");
  std::string user = "News List:\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& a = *history[i];
    if (!a.theme_topics) throw DataError("profile prompt: article " + a.id + " has no theme topics; annotate first");
    user += render_record({{"ID", "News " + std::to_string(i + 1)},
                           {"title", a.title},
                           {"category", a.category},
                           {"topics", text::join(*a.theme_topics, ", ")}});
    user += "\n";
  }
  return {kProfileInstruction, user};
}

std::string interest_sentence(const UserInterestProfile& profile) {
  return "This user is interested in news about [" + text::join(profile.categories, ", ") + "], especially [" +
         text::join(profile.topics, ", ") + "].";
}

namespace {

std::string topics_of(const NewsArticle& a) { return a.theme_topics ? text::join(*a.theme_topics, ", ") : ""; }

}  // namespace

Prompt render_fusion_prompt(const NewsArticle& focal, const std::vector<const NewsArticle*>& related,
                            const UserInterestProfile& profile) {
  if (profile.empty()) throw DataError("fusion prompt: empty user interest profile");
  std::string user = "News List:\n";
  user += render_record(
      {{"ID", "Main News"}, {"title", focal.title}, {"abstract", focal.abstract}, {"topics", topics_of(focal)}});
  user += "\n";
  for (std::size_t i = 0; i < related.size(); ++i) {
    const auto& a = *related[i];
    user += render_record({{"ID", "Topic-related News " + std::to_string(i + 1)},
                           {"title", a.title},
                           {"abstract", a.abstract},
                           {"topics", topics_of(a)}});
    user += "\n";
  }
  user += "User Interest:\n" + interest_sentence(profile);
  return {kFusionInstruction, user};
}

Prompt render_judge_prompt(const std::vector<const NewsArticle*>& sources, const std::string& title,
                           const std::string& abstract) {
  std::string user = "Sources:\n";
  for (std::size_t i = 0; i < sources.size(); ++i) {
    user += render_record({{"ID", "Source " + std::to_string(i + 1)},
                           {"title", sources[i]->title},
                           {"abstract", sources[i]->abstract}});
    user += "\n";
  }
  user += "Summary:\n" + render_record({{"title", title}, {"abstract", abstract}}) + "\n";
  user += "Is the summary consistent with the sources? Answer yes or no.";
  return {kJudgeInstruction, user};
}

namespace {

// Contents of every [...] group, in order.
std::vector<std::string> bracket_groups(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find('[', pos);
    if (open == std::string_view::npos) break;
    const auto close = s.find(']', open + 1);
    if (close == std::string_view::npos) break;
    auto inner = s.substr(open + 1, close - open - 1);
    // A nested '[' restarts the group.
    const auto nested = inner.rfind('[');
    if (nested != std::string_view::npos) inner = inner.substr(nested + 1);
    out.emplace_back(inner);
    pos = close + 1;
  }
  return out;
}

std::size_t find_ci(std::string_view haystack, std::string_view needle) {
  const std::string h = text::to_lower(haystack);
  return h.find(text::to_lower(needle));
}

// Comma-split contents of the first bracket group after `marker`, or empty.
std::vector<std::string> group_after(std::string_view s, std::string_view marker) {
  const auto at = find_ci(s, marker);
  if (at == std::string::npos) return {};
  const auto groups = bracket_groups(s.substr(at + marker.size()));
  if (groups.empty()) return {};
  std::vector<std::string> out;
  for (const auto& piece : text::split(groups.front(), ',')) {
    const auto t = text::trim(piece);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

}  // namespace

std::vector<std::string> parse_theme_response(const std::string& response) {
  std::vector<std::string> out;
  for (const auto& g : bracket_groups(response)) {
    const auto t = text::trim(g);
    if (t.empty()) continue;
    out.push_back(text::truncate_words(t, corpus::kMaxTopicWords));
    if (out.size() == corpus::kMaxThemeTopics) break;
  }
  if (out.empty()) throw ParseError("theme response has no bracketed topics: " + response.substr(0, 200));
  return out;
}

UserInterestProfile parse_profile_response(const std::string& response) {
  UserInterestProfile p;
  p.categories = group_after(response, "news about");
  p.topics = group_after(response, "especially");
  p.supporting_ids = group_after(response, "according to");
  if (p.empty()) throw ParseError("profile response has neither categories nor topics: " + response.substr(0, 200));
  return p;
}

namespace {

std::vector<std::string> topic_list(const nlohmann::json& v) {
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (x.is_string()) out.push_back(std::string(text::trim(x.get<std::string>())));
    }
  } else if (v.is_string()) {
    for (const auto& piece : text::split(v.get<std::string>(), ',')) {
      const auto t = text::trim(piece);
      if (!t.empty()) out.emplace_back(t);
    }
  }
  return out;
}

std::string string_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && it->is_string() ? std::string(text::trim(it->get<std::string>())) : std::string();
}

bool from_json_object(const std::string& s, NarrativeDraft& d) {
  const auto open = s.find('{');
  const auto close = s.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return false;
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(s.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (!obj.is_object()) return false;
  d.title = string_field(obj, "title");
  d.abstract = string_field(obj, "abstract");
  d.category = string_field(obj, "category");
  if (obj.contains("topics")) {
    d.topics = topic_list(obj["topics"]);
  } else if (obj.contains("topic")) {
    d.topics = topic_list(obj["topic"]);
  }
  return true;
}

// Value of `"key": "..."` in loosely formatted text. The value ends at the
// last quote before the next `"key":` marker or the closing brace.
std::string scan_value(const std::string& s, const std::string& key) {
  const std::string marker = "\"" + key + "\"";
  std::size_t at = s.find(marker);
  while (at != std::string::npos) {
    std::size_t p = at + marker.size();
    while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
    if (p < s.size() && s[p] == ':') break;
    at = s.find(marker, at + 1);
  }
  if (at == std::string::npos) return {};
  std::size_t p = s.find(':', at + marker.size()) + 1;
  while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
  if (p >= s.size() || s[p] != '"') return {};
  const std::size_t start = p + 1;
  std::size_t end = std::string::npos;
  for (const char* k : {"title", "category", "topics", "topic", "abstract"}) {
    const auto next = s.find(std::string("\"") + k + "\"", start);
    if (next != std::string::npos && next < end) {
      const auto colon = s.find_first_not_of(" \t\r\n", next + std::strlen(k) + 2);
      if (colon != std::string::npos && s[colon] == ':') end = next;
    }
  }
  if (end == std::string::npos) end = s.rfind('}');
  if (end == std::string::npos || end < start) end = s.size();
  const auto q = s.rfind('"', end == 0 ? 0 : end - 1);
  if (q == std::string::npos || q < start) return {};
  return std::string(text::trim(s.substr(start, q - start)));
}

}  // namespace

NarrativeDraft parse_narrative_response(const std::string& response) {
  NarrativeDraft d;
  d.raw = response;
  if (!from_json_object(response, d)) {
    d.title = scan_value(response, "title");
    d.abstract = scan_value(response, "abstract");
    d.category = scan_value(response, "category");
    auto topics = scan_value(response, "topics");
    if (topics.empty()) topics = scan_value(response, "topic");
    d.topics = topic_list(nlohmann::json(topics));
  }
  if (d.title.empty() || d.abstract.empty()) {
    throw ParseError("narrative response lacks a title or abstract: " + response.substr(0, 200));
  }
  return d;
}

bool parse_judge_response(const std::string& response) {
  const auto w = text::words(response);
  if (!w.empty() && w.front() == "yes") return true;
  if (!w.empty() && w.front() == "no") return false;
  throw ParseError("judge answer is neither yes nor no: " + response.substr(0, 200));
}

bool extractive_consistent(const std::vector<std::string>& source_texts, const std::string& narrative,
                           double threshold) {
  std::vector<std::string> source_sentences;
  for (const auto& s : source_texts) {
    for (auto& x : text::sentences(s)) source_sentences.push_back(std::move(x));
  }
  for (const auto& sentence : text::sentences(narrative)) {
    if (text::words(sentence).empty()) continue;
    bool supported = false;
    for (const auto& src : source_sentences) {
      if (text::jaccard(sentence, src) >= threshold) {
        supported = true;
        break;
      }
    }
    if (!supported) return false;
  }
  return true;
}

}  // namespace gnr::llm
