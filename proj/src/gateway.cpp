#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "gnr/gateway.hpp"

#include "gnr/text_util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <thread>

namespace gnr::llm {

ProviderKind parse_provider_kind(const std::string& name) {
  if (name == "stub") return ProviderKind::kStub;
  if (name == "openai") return ProviderKind::kOpenAI;
  throw ConfigError("unknown provider kind '" + name + "' (expected stub or openai)");
}

std::string to_string(ProviderKind kind) { return kind == ProviderKind::kStub ? "stub" : "openai"; }

CacheMode parse_cache_mode(const std::string& name) {
  if (name == "off") return CacheMode::kOff;
  if (name == "read_write") return CacheMode::kReadWrite;
  if (name == "replay_only") return CacheMode::kReplayOnly;
  throw ConfigError("unknown cache mode '" + name + "' (expected off, read_write or replay_only)");
}

std::string to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::kOff:
      return "off";
    case CacheMode::kReadWrite:
      return "read_write";
    case CacheMode::kReplayOnly:
      return "replay_only";
  }
  return "off";
}

void ProviderConfig::validate() const {
  if (!(timeout_s > 0.0)) throw ConfigError("provider.timeout_s must be > 0");
  if (max_parallel < 1) throw ConfigError("provider.max_parallel must be at least 1");
  if (!(backoff_base_s >= 0.0)) throw ConfigError("provider.backoff_base_s must be >= 0");
  if (kind == ProviderKind::kOpenAI && endpoint.empty()) throw ConfigError("provider.endpoint is empty");
  if (cache_mode != CacheMode::kOff && log_path.empty()) {
    throw ConfigError("provider.cache_mode requires provider.log_path");
  }
}

HttpResponse HttplibTransport::post(const std::string& base_url, const std::string& path,
                                    const std::map<std::string, std::string>& headers, const std::string& body,
                                    double timeout_s) {
  httplib::Client client(base_url);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw TimeoutError("request to " + base_url + path + " timed out (" + httplib::to_string(err) + ")");
    }
    throw TransportError("request to " + base_url + path + " failed: " + httplib::to_string(err));
  }
  return {res->status, res->body};
}

std::string build_request_body(const Prompt& prompt, const ProviderConfig& config) {
  nlohmann::json body = {{"model", config.model},
                         {"temperature", config.temperature},
                         {"messages",
                          {{{"role", "system"}, {"content", prompt.system}},
                           {{"role", "user"}, {"content", prompt.user}}}}};
  return body.dump();
}

std::string extract_content(const std::string& body, std::string* usage) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (content.empty()) throw ProviderError("provider returned an empty completion");
    if (usage != nullptr) *usage = j.contains("usage") ? j["usage"].dump() : "";
    return content;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed completion body: ") + e.what());
  }
}

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "and",  "are",   "as",    "at",   "be",   "but",  "by",   "for",  "from", "has",
      "have", "he",   "her",  "his",   "in",    "into", "is",   "it",   "its",  "of",   "on",   "or",
      "over", "says", "said", "she",   "that",  "the",  "their", "they", "this", "to",  "was",  "were",
      "will", "with", "after", "about", "amid", "new",  "not",  "up",   "out",  "who",  "what", "why",
      "how",  "s",    "than", "then",  "we",    "you",  "i",    "our",  "more", "can",  "could", "would"};
  return words;
}

std::uint64_t seeded_rank(std::uint64_t seed, const std::string& key) {
  const auto h = text::sha256_hex(std::to_string(seed) + ":" + key);
  return std::stoull(h.substr(0, 15), nullptr, 16);
}

// JSON records found one per line in a prompt's user message.
std::vector<nlohmann::json> records_in(const std::string& user, const std::string& stop_marker = "") {
  std::vector<nlohmann::json> out;
  for (const auto& raw : text::split(user, '\n')) {
    const auto line = text::trim(raw);
    if (!stop_marker.empty() && line == stop_marker) break;
    if (line.empty() || line.front() != '{') continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.is_object()) out.push_back(std::move(j));
    } catch (const nlohmann::json::exception&) {
    }
  }
  return out;
}

std::string field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::vector<std::string> comma_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& p : text::split(s, ',')) {
    const auto t = text::trim(p);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

void add_unique(std::vector<std::string>& out, const std::string& item) {
  if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
}

std::string stub_theme(const Prompt& prompt, std::uint64_t seed) {
  const auto recs = records_in(prompt.user);
  const std::string title = recs.empty() ? prompt.user : field(recs.front(), "title");
  const auto raw = text::raw_words(title);
  struct Phrase {
    std::string text;
    std::size_t count = 0;
    std::size_t first = 0;
  };
  auto collect = [&](std::size_t n) {
    std::map<std::string, Phrase> by_key;
    for (std::size_t i = 0; i + n <= raw.size(); ++i) {
      bool ok = true;
      std::vector<std::string> parts;
      for (std::size_t k = 0; k < n; ++k) {
        if (stopwords().count(text::to_lower(raw[i + k])) > 0) ok = false;
        parts.push_back(raw[i + k]);
      }
      if (!ok) continue;
      const auto key = text::to_lower(text::join(parts, " "));
      auto [it, inserted] = by_key.emplace(key, Phrase{text::join(parts, " "), 0, i});
      ++it->second.count;
    }
    std::vector<std::pair<std::string, Phrase>> ranked(by_key.begin(), by_key.end());
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.second.count != b.second.count) return a.second.count > b.second.count;
      const auto ra = seeded_rank(seed, a.first), rb = seeded_rank(seed, b.first);
      if (ra != rb) return ra < rb;
      return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < corpus::kMaxThemeTopics; ++i) out.push_back(ranked[i].second.text);
    return out;
  };
  auto topics = collect(2);
  if (topics.empty()) topics = collect(1);
  if (topics.empty()) topics.push_back(text::truncate_words(title.empty() ? "news" : title, corpus::kMaxTopicWords));
  std::string out = "This news is related to ";
  for (std::size_t i = 0; i < topics.size(); ++i) out += (i ? ", [" : "[") + topics[i] + "]";
  return out + ".";
}

std::string stub_profile(const Prompt& prompt) {
  const auto recs = records_in(prompt.user);
  std::vector<std::string> ids, order, topics;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : recs) {
    ids.push_back(field(r, "ID"));
    const auto cat = field(r, "category");
    if (!cat.empty()) {
      if (counts[cat]++ == 0) order.push_back(cat);
    }
    for (const auto& t : comma_list(field(r, "topics"))) add_unique(topics, t);
  }
  std::string best;
  std::size_t best_count = 0;
  for (const auto& c : order) {
    if (counts[c] > best_count) {
      best = c;
      best_count = counts[c];
    }
  }
  if (topics.size() > 5) topics.resize(5);
  if (best.empty() && topics.empty()) topics.push_back("news");
  return "According to [" + text::join(ids, ", ") + "], this user is interested in news about [" + best +
         "], especially [" + text::join(topics, ", ") + "].";
}

std::string with_terminator(std::string s) {
  if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') s.push_back('.');
  return s;
}

std::string stub_fusion(const Prompt& prompt) {
  const auto recs = records_in(prompt.user, "User Interest:");
  if (recs.empty()) return "{\"title\": \"\", \"abstract\": \"\"}";
  std::vector<std::string> topics, pieces;
  for (const auto& r : recs) {
    for (const auto& t : comma_list(field(r, "topics"))) add_unique(topics, t);
    const auto first = text::first_sentence(field(r, "abstract"));
    if (!first.empty()) pieces.push_back(with_terminator(first));
  }
  const auto title = field(recs.front(), "title");
  const auto abstract = pieces.empty() ? with_terminator(title) : text::join(pieces, " ");
  return render_record({{"title", title}, {"topics", text::join(topics, ", ")}, {"abstract", abstract}});
}

std::string stub_judge(const Prompt& prompt) {
  const auto marker = prompt.user.find("Summary:\n");
  const auto sources = records_in(prompt.user.substr(0, marker));
  const auto summary = marker == std::string::npos ? std::vector<nlohmann::json>{}
                                                   : records_in(prompt.user.substr(marker));
  if (summary.empty()) return "no";
  std::vector<std::string> texts;
  for (const auto& s : sources) {
    texts.push_back(field(s, "title"));
    texts.push_back(field(s, "abstract"));
  }
  const bool ok = extractive_consistent(texts, field(summary.front(), "title")) &&
                  extractive_consistent(texts, field(summary.front(), "abstract"));
  return ok ? "yes" : "no";
}

}  // namespace

std::string stub_complete(const Prompt& prompt, std::uint64_t seed) {
  if (prompt.system == kThemeInstruction) return stub_theme(prompt, seed);
  if (prompt.system == kProfileInstruction) return stub_profile(prompt);
  if (prompt.system == kFusionInstruction) return stub_fusion(prompt);
  if (prompt.system == kJudgeInstruction) return stub_judge(prompt);
  return "stub response " + prompt.hash().substr(0, 12);
}

Gateway::Gateway(ProviderConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      jitter_(config_.stub_seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
  if (!sleeper_) {
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
  if (config_.cache_mode != CacheMode::kOff) {
    std::ifstream in(config_.log_path, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        cache_[j.at("prompt_hash").get<std::string>()] = j.at("response").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed exchange log line in " + config_.log_path + ": " + e.what());
      }
    }
  }
}

std::size_t Gateway::attempts() const {
  std::lock_guard lock(count_mutex_);
  return attempts_;
}

double Gateway::backoff_delay(std::size_t retry) {
  std::lock_guard lock(rng_mutex_);
  const double base = config_.backoff_base_s * std::ldexp(1.0, static_cast<int>(retry));
  return base * (1.0 + 0.25 * jitter_.uniform());
}

std::string Gateway::call_provider(const Prompt& prompt, std::string& usage) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("credential variable " + config_.api_key_env + " is not set");
  }
  const std::map<std::string, std::string> headers = {{"Authorization", std::string("Bearer ") + key}};
  const std::string body = build_request_body(prompt, config_);

  bool last_timeout = false;
  int last_status = 0;
  std::string last_message;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(attempt - 1));
    {
      std::lock_guard lock(count_mutex_);
      ++attempts_;
    }
    HttpResponse res;
    try {
      res = transport_->post(config_.endpoint, kChatPath, headers, body, config_.timeout_s);
    } catch (const TimeoutError& e) {
      last_timeout = true;
      last_message = e.what();
      continue;
    } catch (const TransportError& e) {
      last_timeout = false;
      last_message = e.what();
      continue;
    }
    if (res.status >= 200 && res.status < 300) return extract_content(res.body, &usage);
    last_timeout = false;
    last_status = res.status;
    std::string message = "HTTP " + std::to_string(res.status);
    try {
      const auto j = nlohmann::json::parse(res.body);
      message += ": " + j.at("error").at("message").get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    last_message = message;
    if (res.status == 429 || res.status >= 500) continue;
    throw ProviderError("provider rejected the request: " + message, res.status);
  }
  const std::string summary =
      "gave up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_message;
  if (last_timeout) throw TimeoutError(summary);
  throw TransportError(summary, last_status);
}

void Gateway::append_log(const ChatExchange& ex) {
  if (config_.log_path.empty()) return;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  nlohmann::json rec = {{"timestamp", stamp},       {"prompt_hash", ex.prompt_hash}, {"provider", ex.provider},
                        {"system", ex.system},      {"user", ex.user},               {"response", ex.response},
                        {"usage", ex.usage}};
  std::lock_guard lock(log_mutex_);
  std::ofstream out(config_.log_path, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to exchange log " + config_.log_path);
  out << rec.dump() << '\n';
}

ChatExchange Gateway::complete(const Prompt& prompt) {
  ChatExchange ex;
  ex.system = prompt.system;
  ex.user = prompt.user;
  ex.prompt_hash = prompt.hash();

  if (config_.cache_mode != CacheMode::kOff) {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(ex.prompt_hash);
    if (it != cache_.end()) {
      ex.response = it->second;
      ex.provider = "real";
      ex.from_cache = true;
      return ex;
    }
  }
  if (config_.cache_mode == CacheMode::kReplayOnly) {
    throw ProviderError("replay_only cache has no response for prompt " + ex.prompt_hash);
  }
  if (config_.kind == ProviderKind::kStub) {
    ex.response = stub_complete(prompt, config_.stub_seed);
    ex.provider = "stub";
    return ex;
  }

  {
    std::unique_lock lock(slot_mutex_);
    slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_parallel; });
    ++in_flight_;
  }
  try {
    ex.response = call_provider(prompt, ex.usage);
  } catch (...) {
    {
      std::lock_guard lock(slot_mutex_);
      --in_flight_;
    }
    slot_cv_.notify_one();
    throw;
  }
  {
    std::lock_guard lock(slot_mutex_);
    --in_flight_;
  }
  slot_cv_.notify_one();

  ex.provider = "real";
  append_log(ex);
  if (config_.cache_mode == CacheMode::kReadWrite) {
    std::unique_lock lock(cache_mutex_);
    cache_[ex.prompt_hash] = ex.response;
  }
  return ex;
}

}  // namespace gnr::llm
