#pragma once

#include "gnr/common.hpp"
#include "gnr/prompts.hpp"
#include "gnr/rng.hpp"

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

namespace gnr::llm {

enum class ProviderKind { kStub, kOpenAI };
enum class CacheMode { kOff, kReadWrite, kReplayOnly };

ProviderKind parse_provider_kind(const std::string& name);
std::string to_string(ProviderKind kind);
CacheMode parse_cache_mode(const std::string& name);
std::string to_string(CacheMode mode);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kStub;
  std::string endpoint = "https://api.openai.com";
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_s = 60.0;
  std::size_t max_retries = 3;
  std::size_t max_parallel = 4;
  double temperature = 0.0;
  double backoff_base_s = 1.0;
  std::string log_path;  // exchange log (JSON lines); empty disables logging
  CacheMode cache_mode = CacheMode::kOff;
  std::uint64_t stub_seed = 0;

  void validate() const;
};

struct ChatExchange {
  std::string system;
  std::string user;
  std::string response;
  std::string usage;     // provider usage block, serialized as-is
  std::string provider;  // "real" or "stub"
  std::string prompt_hash;
  bool from_cache = false;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// One HTTP POST. Connection failures throw TransportError, timeouts TimeoutError.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path,
                            const std::map<std::string, std::string>& headers, const std::string& body,
                            double timeout_s) = 0;
};

class HttplibTransport : public Transport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path,
                    const std::map<std::string, std::string>& headers, const std::string& body,
                    double timeout_s) override;
};

using Sleeper = std::function<void(double seconds)>;

inline constexpr const char* kChatPath = "/v1/chat/completions";

std::string build_request_body(const Prompt& prompt, const ProviderConfig& config);
// choices[0].message.content; ProviderError when absent or empty.
std::string extract_content(const std::string& body, std::string* usage = nullptr);

// Deterministic offline responder: a pure function of (prompt, seed).
std::string stub_complete(const Prompt& prompt, std::uint64_t seed);

// Thread-safe chat-completion client with retries, bounded parallelism, an
// exchange log and an optional replay cache keyed by prompt hash.
class Gateway {
 public:
  explicit Gateway(ProviderConfig config, std::shared_ptr<Transport> transport = nullptr, Sleeper sleeper = nullptr);

  ChatExchange complete(const Prompt& prompt);

  const ProviderConfig& config() const { return config_; }
  // Network attempts made so far (including retries).
  std::size_t attempts() const;

 private:
  std::string call_provider(const Prompt& prompt, std::string& usage);
  void append_log(const ChatExchange& exchange);
  double backoff_delay(std::size_t retry);

  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;

  std::mutex slot_mutex_;
  std::condition_variable slot_cv_;
  std::size_t in_flight_ = 0;

  mutable std::shared_mutex cache_mutex_;
  std::unordered_map<std::string, std::string> cache_;

  std::mutex log_mutex_;
  std::mutex rng_mutex_;
  Rng jitter_;
  mutable std::mutex count_mutex_;
  std::size_t attempts_ = 0;
};

}  // namespace gnr::llm
