#include "gnr/gateway.hpp"
#include "gnr/prompts.hpp"
#include "gnr/text_util.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

using namespace gnr;
using namespace gnr::llm;
using gnr::testing::TempDir;

namespace {

NewsArticle trump_article() {
  return {"N1", "politics", "Trump says the Kurds 'are no angels' and the PKK are 'probably worse' than ISIS",
          "President Trump defended his decision to withdraw U.S. forces from Syria.", std::nullopt};
}

NewsArticle sports(const std::string& id, const std::string& title, const std::string& topics) {
  return {id, "sports", title, "", std::vector<std::string>{topics}};
}

const char* const kKavanaugh =
    "{\"title\": \"Brett Kavanaugh Gives First Speech as Justice, Praises Ruth Bader Ginsburg Being World Champion\", "
    "\"category\": \"politics\", \"topics\": \"Brett Kavanaugh, Ruth Bader Ginsburg, Supreme Court\", \"abstract\": "
    "\"In his first speech as a Supreme Court justice, Brett Kavanaugh expressed gratitude to his supporters and "
    "hailed Ruth Bader Ginsburg as an inspiration. Despite being absent due to a stomach bug earlier this week, "
    "Ginsburg returned to work on Friday.\"}";

std::string ok_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                        {"usage", {{"total_tokens", 7}}}}
      .dump();
}

// Replays scripted responses; throws TransportError once the script is exhausted.
class ScriptedTransport : public Transport {
 public:
  explicit ScriptedTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}
  HttpResponse post(const std::string&, const std::string& path, const std::map<std::string, std::string>& headers,
                    const std::string& body, double) override {
    std::lock_guard lock(mu_);
    ++calls;
    last_path = path;
    last_headers = headers;
    last_body = body;
    if (script_.empty()) throw TransportError("connection refused");
    auto r = script_.front();
    script_.pop_front();
    return r;
  }
  std::size_t calls = 0;
  std::string last_path, last_body;
  std::map<std::string, std::string> last_headers;

 private:
  std::mutex mu_;
  std::deque<HttpResponse> script_;
};

// Tracks the peak number of concurrent posts.
class SlowTransport : public Transport {
 public:
  HttpResponse post(const std::string&, const std::string&, const std::map<std::string, std::string>&,
                    const std::string&, double) override {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    return {200, ok_body("fine")};
  }
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
};

ProviderConfig real_config() {
  ::setenv("GNR_TEST_KEY", "secret-token", 1);
  ProviderConfig c;
  c.kind = ProviderKind::kOpenAI;
  c.endpoint = "http://127.0.0.1:9";
  c.api_key_env = "GNR_TEST_KEY";
  c.backoff_base_s = 1.0;
  return c;
}

Sleeper recorder(std::vector<double>& delays) {
  return [&delays](double s) { delays.push_back(s); };
}

}  // namespace

TEST(ThemePrompt, MirrorsTableFieldOrder) {
  const auto p = render_theme_prompt(trump_article());
  EXPECT_EQ(p.system, kThemeInstruction);
  EXPECT_NE(p.system.find("1-3 topics"), std::string::npos);
  EXPECT_NE(p.user.find("\"title\": \"Trump says the Kurds"), std::string::npos);
  const auto t = p.user.find("\"title\""), a = p.user.find("\"abstract\""), c = p.user.find("\"category\"");
  EXPECT_LT(t, a);
  EXPECT_LT(a, c);
  EXPECT_EQ(p, render_theme_prompt(trump_article()));
  auto empty = trump_article();
  empty.abstract.clear();
  EXPECT_NE(render_theme_prompt(empty).user.find("\"abstract\": \"\""), std::string::npos);
  empty.title.clear();
  EXPECT_THROW(render_theme_prompt(empty), DataError);
}

TEST(ProfilePrompt, NumberedListWithTopics) {
  const auto a = sports("N1", "Lionel Messi says he wants to continue", "Argentina football player Lionel Messi");
  const auto b = sports("N2", "How the world reacted to the best World Cup final ever", "World Cup final");
  const auto p = render_profile_prompt({&a, &b});
  EXPECT_NE(p.user.find("{\"ID\": \"News 1\", \"title\": \"Lionel Messi says he wants to continue\", \"category\": "
                        "\"sports\", \"topics\": \"Argentina football player Lionel Messi\"}"),
            std::string::npos);
  EXPECT_NE(p.user.find("\"News 2\""), std::string::npos);
  const auto swapped = render_profile_prompt({&b, &a});
  EXPECT_LT(swapped.user.find("World Cup final ever"), swapped.user.find("Lionel Messi says"));
  EXPECT_EQ(render_profile_prompt({&a}).user.find("\"News 2\""), std::string::npos);
  auto bare = a;
  bare.theme_topics.reset();
  EXPECT_THROW(render_profile_prompt({&bare}), DataError);
  EXPECT_THROW(render_profile_prompt({}), DataError);
}

TEST(FusionPrompt, MainNewsRelatedAndInterest) {
  const auto focal = sports("N1", "Lionel Messi says he wants to continue", "Messi");
  const auto r1 = sports("N2", "How the world reacted", "the World Cup final");
  const auto r2 = sports("N3", "Lionel Messi cements his place", "Lionel Messi");
  const auto r3 = sports("N4", "Why Argentina's win was the greatest", "World Cup");
  UserInterestProfile prof{"U1", {"sports"}, {"Lionel Messi", "Argentina national football team"}, {}};
  const auto p = render_fusion_prompt(focal, {&r1, &r2, &r3}, prof);
  EXPECT_NE(p.user.find("{\"ID\": \"Main News\", \"title\": \"Lionel Messi says he wants to continue\""),
            std::string::npos);
  EXPECT_NE(p.user.find("Topic-related News 3"), std::string::npos);
  EXPECT_EQ(p.user.find("Topic-related News 4"), std::string::npos);
  EXPECT_NE(p.user.find("interested in news about [sports], especially [Lionel Messi, Argentina national football "
                        "team]."),
            std::string::npos);
  const auto small = render_fusion_prompt(focal, {&r1}, {"U", {"politics"}, {"Supreme Court"}, {}});
  EXPECT_NE(small.user.find("Topic-related News 1"), std::string::npos);
  EXPECT_EQ(small.user.find("Topic-related News 2"), std::string::npos);
  EXPECT_NE(small.user.find("[politics], especially [Supreme Court]"), std::string::npos);
  EXPECT_THROW(render_fusion_prompt(focal, {}, UserInterestProfile{}), DataError);
}

TEST(ParseTheme, TableExampleAndBounds) {
  EXPECT_EQ(parse_theme_response("This news is related to [Trump's decision on Syria], [Kurds and PKK]."),
            (std::vector<std::string>{"Trump's decision on Syria", "Kurds and PKK"}));
  EXPECT_EQ(parse_theme_response("[a][b][c][d]"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(parse_theme_response("[one two three four five six seven]"),
            (std::vector<std::string>{"one two three four five"}));
  EXPECT_THROW(parse_theme_response("no brackets here"), ParseError);
  EXPECT_THROW(parse_theme_response("[ ]"), ParseError);
}

TEST(ParseProfile, TableExample) {
  const auto p = parse_profile_response(
      "According to [News 1, News 2, News 3, News 4], this user is interested in news about [sports], especially "
      "[Lionel Messi, World Cup final, Argentina's victory in the World Cup].");
  EXPECT_EQ(p.categories, (std::vector<std::string>{"sports"}));
  EXPECT_EQ(p.topics,
            (std::vector<std::string>{"Lionel Messi", "World Cup final", "Argentina's victory in the World Cup"}));
  EXPECT_EQ(p.supporting_ids, (std::vector<std::string>{"News 1", "News 2", "News 3", "News 4"}));
  const auto q = parse_profile_response("This user is interested in news about [politics], especially [Congress].");
  EXPECT_TRUE(q.supporting_ids.empty());
  EXPECT_EQ(q.topics, (std::vector<std::string>{"Congress"}));
  EXPECT_THROW(parse_profile_response("the user likes sports"), ParseError);
}

TEST(ParseNarrative, AppendixExampleAndVariants) {
  const auto d = parse_narrative_response(kKavanaugh);
  EXPECT_EQ(d.title.rfind("Brett Kavanaugh Gives First Speech", 0), 0u);
  EXPECT_EQ(d.category, "politics");
  EXPECT_EQ(d.abstract.rfind("In his first speech", 0), 0u);
  EXPECT_EQ(d.topics, (std::vector<std::string>{"Brett Kavanaugh", "Ruth Bader Ginsburg", "Supreme Court"}));
  const auto m = parse_narrative_response("{\"title\":\"T\",\"abstract\":\"A\"}");
  EXPECT_EQ(m.title, "T");
  EXPECT_TRUE(m.category.empty());
  EXPECT_TRUE(m.topics.empty());
  EXPECT_THROW(parse_narrative_response("{\"category\":\"politics\"}"), ParseError);
  const auto prose = parse_narrative_response("Sure! Here it is: {\"title\": \"T\", \"topic\": \"x, y\", "
                                              "\"abstract\": \"A.\"} Hope that helps.");
  EXPECT_EQ(prose.topics, (std::vector<std::string>{"x", "y"}));
  // Unescaped inner quotes break strict JSON; the loose scanner still recovers the fields.
  const auto loose = parse_narrative_response(
      "{\"title\": \"Ginsburg calls them \"very decent\"\", \"category\": \"politics\", \"abstract\": \"She spoke.\"}");
  EXPECT_EQ(loose.title, "Ginsburg calls them \"very decent\"");
  EXPECT_EQ(loose.abstract, "She spoke.");
}

TEST(ParseJudge, YesNo) {
  EXPECT_TRUE(parse_judge_response("Yes."));
  EXPECT_FALSE(parse_judge_response("no, the second sentence is unsupported"));
  EXPECT_THROW(parse_judge_response("maybe"), ParseError);
}

TEST(Extractive, JaccardRule) {
  EXPECT_TRUE(extractive_consistent({"The senate passed the bill. It now goes to the house."},
                                    "The senate passed the bill."));
  EXPECT_FALSE(extractive_consistent({"The senate passed the bill."}, "The senate passed the bill. Aliens landed."));
  EXPECT_TRUE(extractive_consistent({"x"}, "..."));
}

TEST(Stub, DeterministicAndClosedUnderParsing) {
  const auto focal = sports("N1", "Lionel Messi wins World Cup final", "Lionel Messi");
  const auto rel = sports("N2", "Argentina celebrates World Cup final win", "World Cup final");
  auto with_abs = focal;
  with_abs.abstract = "Messi lifted the trophy. Fans cheered.";
  auto rel_abs = rel;
  rel_abs.abstract = "Buenos Aires partied all night. It was loud.";
  const std::vector<Prompt> prompts = {render_theme_prompt(trump_article()), render_profile_prompt({&focal, &rel}),
                                       render_fusion_prompt(with_abs, {&rel_abs}, {"U", {"sports"}, {"Messi"}, {}})};
  for (const auto& p : prompts) {
    EXPECT_EQ(stub_complete(p, 1), stub_complete(p, 1));
  }
  const auto themes = parse_theme_response(stub_complete(prompts[0], 3));
  EXPECT_GE(themes.size(), 1u);
  EXPECT_LE(themes.size(), 3u);
  for (const auto& t : themes) EXPECT_LE(text::word_count(t), 5u);
  const auto prof = parse_profile_response(stub_complete(prompts[1], 3));
  EXPECT_EQ(prof.categories, (std::vector<std::string>{"sports"}));
  EXPECT_EQ(prof.topics, (std::vector<std::string>{"Lionel Messi", "World Cup final"}));
  const auto d = parse_narrative_response(stub_complete(prompts[2], 3));
  EXPECT_EQ(d.title, with_abs.title);
  EXPECT_EQ(d.abstract, "Messi lifted the trophy. Buenos Aires partied all night.");
}

TEST(Gateway, StubTagsAndSkipsLog) {
  TempDir dir;
  ProviderConfig c;
  c.log_path = (dir / "log.jsonl").string();
  Gateway gw(c);
  const auto p = render_theme_prompt(trump_article());
  const auto a = gw.complete(p), b = gw.complete(p);
  EXPECT_EQ(a.provider, "stub");
  EXPECT_EQ(a.response, b.response);
  EXPECT_EQ(a.prompt_hash, p.hash());
  EXPECT_EQ(gw.attempts(), 0u);
  EXPECT_FALSE(std::filesystem::exists(dir / "log.jsonl"));
}

TEST(Gateway, RetriesTooManyRequestsThenSucceeds) {
  TempDir dir;
  auto c = real_config();
  c.log_path = (dir / "log.jsonl").string();
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{
      {429, "{\"error\":{\"message\":\"slow down\"}}"}, {429, ""}, {200, ok_body("This news is related to [x].")}});
  std::vector<double> delays;
  Gateway gw(c, t, recorder(delays));
  const auto ex = gw.complete({"sys", "user"});
  EXPECT_EQ(ex.response, "This news is related to [x].");
  EXPECT_EQ(ex.provider, "real");
  EXPECT_EQ(t->calls, 3u);
  ASSERT_EQ(delays.size(), 2u);
  EXPECT_GE(delays[0], 1.0);
  EXPECT_LE(delays[0], 1.25);
  EXPECT_GE(delays[1], 2.0);
  EXPECT_LE(delays[1], 2.5);
  const auto log = gnr::testing::read_file(dir / "log.jsonl");
  const auto rec = nlohmann::json::parse(log.substr(0, log.find('\n')));
  EXPECT_EQ(rec.at("prompt_hash"), Prompt({"sys", "user"}).hash());
  EXPECT_EQ(rec.at("provider"), "real");
  EXPECT_EQ(rec.at("response"), ex.response);
  EXPECT_TRUE(rec.contains("timestamp"));
}

TEST(Gateway, ExhaustedRetriesAndRejections) {
  auto c = real_config();
  c.max_retries = 1;
  std::vector<double> delays;
  auto down = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  Gateway gw(c, down, recorder(delays));
  EXPECT_THROW(gw.complete({"s", "u"}), TransportError);
  EXPECT_EQ(down->calls, 2u);

  auto bad = std::make_shared<ScriptedTransport>(
      std::deque<HttpResponse>{{400, "{\"error\":{\"message\":\"bad model\"}}"}, {200, ok_body("x")}});
  Gateway gw2(c, bad, recorder(delays));
  try {
    gw2.complete({"s", "u"});
    FAIL() << "expected ProviderError";
  } catch (const TransportError&) {
    FAIL() << "400 must not be retried";
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(std::string(e.what()).find("bad model"), std::string::npos);
  }
  EXPECT_EQ(bad->calls, 1u);

  auto empty = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, ok_body("")}});
  Gateway gw3(c, empty, recorder(delays));
  EXPECT_THROW(gw3.complete({"s", "u"}), ProviderError);
}

TEST(Gateway, RequestShape) {
  auto c = real_config();
  c.model = "m1";
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, ok_body("ok")}});
  Gateway gw(c, t);
  gw.complete({"instr", "input"});
  EXPECT_EQ(t->last_path, "/v1/chat/completions");
  EXPECT_EQ(t->last_headers.at("Authorization"), "Bearer secret-token");
  const auto body = nlohmann::json::parse(t->last_body);
  EXPECT_EQ(body.at("model"), "m1");
  EXPECT_EQ(body.at("temperature"), 0.0);
  EXPECT_EQ(body.at("messages").size(), 2u);
  EXPECT_EQ(body.at("messages")[0].at("role"), "system");
  EXPECT_EQ(body.at("messages")[0].at("content"), "instr");
  EXPECT_EQ(body.at("messages")[1].at("role"), "user");
  EXPECT_EQ(body.at("messages")[1].at("content"), "input");
}

TEST(Gateway, MissingCredential) {
  auto c = real_config();
  c.api_key_env = "GNR_TEST_UNSET_KEY";
  ::unsetenv("GNR_TEST_UNSET_KEY");
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, ok_body("ok")}});
  Gateway gw(c, t);
  EXPECT_THROW(gw.complete({"s", "u"}), ConfigError);
  EXPECT_EQ(t->calls, 0u);
}

TEST(Gateway, BoundedParallelism) {
  auto c = real_config();
  c.max_parallel = 2;
  auto t = std::make_shared<SlowTransport>();
  Gateway gw(c, t);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&, i] { gw.complete({"s", std::to_string(i)}); });
  for (auto& th : threads) th.join();
  EXPECT_LE(t->peak.load(), 2);
  EXPECT_GE(t->peak.load(), 1);
  EXPECT_EQ(gw.attempts(), 8u);
}

TEST(Gateway, ReplayAndReadWriteCache) {
  TempDir dir;
  auto c = real_config();
  c.log_path = (dir / "log.jsonl").string();
  c.cache_mode = CacheMode::kReadWrite;
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, ok_body("first")}});
  {
    Gateway gw(c, t);
    EXPECT_EQ(gw.complete({"s", "u"}).response, "first");
    const auto again = gw.complete({"s", "u"});
    EXPECT_TRUE(again.from_cache);
    EXPECT_EQ(t->calls, 1u);
  }
  c.cache_mode = CacheMode::kReplayOnly;
  Gateway replay(c, t);
  const auto ex = replay.complete({"s", "u"});
  EXPECT_EQ(ex.response, "first");
  EXPECT_TRUE(ex.from_cache);
  EXPECT_THROW(replay.complete({"s", "other"}), ProviderError);
  EXPECT_EQ(t->calls, 1u);
}

TEST(ProviderConfig, Validation) {
  ProviderConfig c;
  c.timeout_s = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_parallel = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.cache_mode = CacheMode::kReplayOnly;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_provider_kind("anthropic"), ConfigError);
  EXPECT_EQ(parse_cache_mode("replay_only"), CacheMode::kReplayOnly);
}
