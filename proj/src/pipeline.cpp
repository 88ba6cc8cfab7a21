#include "gnr/pipeline.hpp"

#include "gnr/annotate.hpp"
#include "gnr/checkpoint.hpp"
#include "gnr/corpus.hpp"
#include "gnr/eval.hpp"
#include "gnr/fusion.hpp"
#include "gnr/parallel.hpp"
#include "gnr/text_util.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>

namespace gnr::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config_json() { return to_json(RunConfig{}); }

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"paths",
       {{"news", c.paths.news.string()},
        {"behaviors", c.paths.behaviors.string()},
        {"relation_pairs", c.paths.relation_pairs.string()},
        {"themes", c.paths.themes.string()},
        {"output_dir", c.paths.output_dir.string()}}},
      {"data",
       {{"category", c.data.category}, {"min_history", c.data.min_history}, {"max_history", c.data.max_history}}},
      {"provider",
       {{"kind", llm::to_string(c.provider.kind)},
        {"endpoint", c.provider.endpoint},
        {"model", c.provider.model},
        {"api_key_env", c.provider.api_key_env},
        {"timeout_s", c.provider.timeout_s},
        {"max_retries", c.provider.max_retries},
        {"max_parallel", c.provider.max_parallel},
        {"temperature", c.provider.temperature},
        {"backoff_base_s", c.provider.backoff_base_s},
        {"log_path", c.provider.log_path},
        {"cache_mode", llm::to_string(c.provider.cache_mode)},
        {"stub_seed", c.provider.stub_seed}}},
      {"encoder",
       {{"dim", c.encoder.dim},
        {"heads", c.encoder.heads},
        {"max_len", c.encoder.max_len},
        {"theme_max_len", c.encoder.theme_max_len},
        {"min_freq", c.encoder.min_freq},
        {"init_scale", c.encoder.init_scale}}},
      {"ranker",
       {{"news_view", ranker::to_string(c.news_view)},
        {"user_view", ranker::to_string(c.user_view)},
        {"k_neg", c.ranker.k_neg},
        {"optimizer", nn::to_string(c.ranker.optimizer.kind)},
        {"learning_rate", c.ranker.optimizer.learning_rate},
        {"epochs", c.ranker.epochs},
        {"batch_size", c.ranker.batch_size}}},
      {"relation",
       {{"margin", c.relation.margin},
        {"optimizer", nn::to_string(c.relation.optimizer.kind)},
        {"learning_rate", c.relation.optimizer.learning_rate},
        {"epochs", c.relation.epochs},
        {"batch_size", c.relation.batch_size}}},
      {"explorer",
       {{"alpha", c.explorer.alpha},
        {"t_min", c.explorer.t_min},
        {"t_max", c.explorer.t_max},
        {"focal_mode", explorer::to_string(c.explorer.focal_mode)},
        {"exclude_history", c.explorer.exclude_history}}},
      {"uift",
       {{"dim", c.uift.generator.dim},
        {"heads", c.uift.generator.heads},
        {"context", c.uift.generator.context},
        {"init_scale", c.uift.generator.init_scale},
        {"sft_optimizer", nn::to_string(c.uift.sft.optimizer.kind)},
        {"sft_learning_rate", c.uift.sft.optimizer.learning_rate},
        {"sft_epochs", c.uift.sft.epochs},
        {"uift_optimizer", nn::to_string(c.uift.uift.optimizer.kind)},
        {"uift_learning_rate", c.uift.uift.optimizer.learning_rate},
        {"uift_epochs", c.uift.uift.epochs},
        {"batch_size", c.uift.sft.batch_size},
        {"rank_mode", c.uift.rank_mode},
        {"max_tokens", c.uift.max_tokens}}},
      {"eval", {{"k", c.eval.k}, {"judge", c.eval.judge}}},
      {"sweep", {{"alphas", c.sweep.alphas}, {"t_max", c.sweep.t_max}}},
  };
}

namespace {

void merge_checked(json& base, const json& over, const std::string& prefix) {
  if (!over.is_object()) throw ConfigError((prefix.empty() ? "config" : prefix) + ": expected an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(key + ": unknown key");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* cur = &root_;
    for (const auto& part : text::split(path, '.')) cur = &cur->at(part);
    return *cur;
  }
  std::string str(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
  }
  double num(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
  }
  std::size_t count(const std::string& path) const {
    const auto& v = at(path);
    // Signed fields serialize as signed JSON integers; accept any integer >= 0.
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError(path + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }
  int positive_int(const std::string& path) const {
    const auto n = count(path);
    if (n == 0 || n > 1 << 20) throw ConfigError(path + ": expected a positive integer");
    return static_cast<int>(n);
  }
  bool flag(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    return v.get<bool>();
  }
  template <typename F>
  auto parsed(const std::string& path, F&& parse) const {
    try {
      return parse(str(path));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }

 private:
  const json& root_;
};

fs::path resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

RunConfig parse_config(const json& overrides, const fs::path& base_dir) {
  json merged = default_config_json();
  merge_checked(merged, overrides, "");
  const Reader r(merged);
  RunConfig c;
  c.seed = r.count("seed");

  c.paths.news = resolve(r.str("paths.news"), base_dir);
  c.paths.behaviors = resolve(r.str("paths.behaviors"), base_dir);
  c.paths.relation_pairs = resolve(r.str("paths.relation_pairs"), base_dir);
  c.paths.themes = resolve(r.str("paths.themes"), base_dir);
  c.paths.output_dir = resolve(r.str("paths.output_dir"), base_dir);

  c.data.category = r.str("data.category");
  c.data.min_history = r.count("data.min_history");
  c.data.max_history = r.count("data.max_history");

  c.provider.kind = r.parsed("provider.kind", llm::parse_provider_kind);
  c.provider.endpoint = r.str("provider.endpoint");
  c.provider.model = r.str("provider.model");
  c.provider.api_key_env = r.str("provider.api_key_env");
  c.provider.timeout_s = r.num("provider.timeout_s");
  c.provider.max_retries = r.count("provider.max_retries");
  c.provider.max_parallel = r.count("provider.max_parallel");
  c.provider.temperature = r.num("provider.temperature");
  c.provider.backoff_base_s = r.num("provider.backoff_base_s");
  c.provider.log_path = resolve(r.str("provider.log_path"), base_dir).string();
  c.provider.cache_mode = r.parsed("provider.cache_mode", llm::parse_cache_mode);
  c.provider.stub_seed = r.count("provider.stub_seed");

  c.encoder.dim = r.positive_int("encoder.dim");
  c.encoder.heads = r.positive_int("encoder.heads");
  c.encoder.max_len = r.count("encoder.max_len");
  c.encoder.theme_max_len = r.count("encoder.theme_max_len");
  c.encoder.min_freq = r.count("encoder.min_freq");
  c.encoder.init_scale = r.num("encoder.init_scale");

  c.news_view = r.parsed("ranker.news_view", ranker::parse_view);
  c.user_view = r.parsed("ranker.user_view", ranker::parse_view);
  c.ranker.k_neg = r.count("ranker.k_neg");
  c.ranker.optimizer.kind = r.parsed("ranker.optimizer", nn::parse_optimizer_kind);
  c.ranker.optimizer.learning_rate = r.num("ranker.learning_rate");
  c.ranker.epochs = r.count("ranker.epochs");
  c.ranker.batch_size = r.count("ranker.batch_size");
  c.ranker.seed = c.seed + 10;

  c.relation.margin = r.num("relation.margin");
  c.relation.optimizer.kind = r.parsed("relation.optimizer", nn::parse_optimizer_kind);
  c.relation.optimizer.learning_rate = r.num("relation.learning_rate");
  c.relation.epochs = r.count("relation.epochs");
  c.relation.batch_size = r.count("relation.batch_size");
  c.relation.seed = c.seed + 11;

  c.explorer.alpha = r.num("explorer.alpha");
  c.explorer.t_min = r.count("explorer.t_min");
  c.explorer.t_max = r.count("explorer.t_max");
  c.explorer.focal_mode = r.parsed("explorer.focal_mode", explorer::parse_focal_mode);
  c.explorer.exclude_history = r.flag("explorer.exclude_history");
  c.relation.threshold = c.explorer.alpha;

  c.uift.generator.dim = r.positive_int("uift.dim");
  c.uift.generator.heads = r.positive_int("uift.heads");
  c.uift.generator.context = r.count("uift.context");
  c.uift.generator.init_scale = r.num("uift.init_scale");
  c.uift.sft.optimizer.kind = r.parsed("uift.sft_optimizer", nn::parse_optimizer_kind);
  c.uift.sft.optimizer.learning_rate = r.num("uift.sft_learning_rate");
  c.uift.sft.epochs = r.count("uift.sft_epochs");
  c.uift.uift.optimizer.kind = r.parsed("uift.uift_optimizer", nn::parse_optimizer_kind);
  c.uift.uift.optimizer.learning_rate = r.num("uift.uift_learning_rate");
  c.uift.uift.epochs = r.count("uift.uift_epochs");
  c.uift.sft.batch_size = c.uift.uift.batch_size = r.count("uift.batch_size");
  c.uift.sft.seed = c.seed + 12;
  c.uift.uift.seed = c.seed + 13;
  c.uift.rank_mode = r.str("uift.rank_mode");
  c.uift.max_tokens = r.count("uift.max_tokens");

  c.eval.k = r.count("eval.k");
  c.eval.judge = r.str("eval.judge");

  c.sweep.alphas.clear();
  for (const auto& a : r.at("sweep.alphas")) {
    if (!a.is_number()) throw ConfigError("sweep.alphas: expected numbers");
    c.sweep.alphas.push_back(a.get<double>());
  }
  c.sweep.t_max.clear();
  for (const auto& t : r.at("sweep.t_max")) {
    if (!t.is_number_unsigned()) throw ConfigError("sweep.t_max: expected non-negative integers");
    c.sweep.t_max.push_back(t.get<std::size_t>());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

void validate(const RunConfig& c) {
  auto need_file = [](const fs::path& p, const char* field, bool required) {
    if (p.empty()) {
      if (required) throw ConfigError(std::string(field) + ": path is required");
      return;
    }
    if (!fs::exists(p)) throw ConfigError(std::string(field) + ": " + p.string() + " does not exist");
  };
  need_file(c.paths.news, "paths.news", true);
  need_file(c.paths.behaviors, "paths.behaviors", true);
  need_file(c.paths.relation_pairs, "paths.relation_pairs", false);
  need_file(c.paths.themes, "paths.themes", false);
  if (c.paths.output_dir.empty()) throw ConfigError("paths.output_dir: path is required");
  if (c.data.min_history > c.data.max_history) throw ConfigError("data.min_history: exceeds data.max_history");
  try {
    c.provider.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()));
  }
  if (c.encoder.dim % c.encoder.heads != 0) throw ConfigError("encoder.heads: must divide encoder.dim");
  if (c.encoder.max_len == 0) throw ConfigError("encoder.max_len: must be positive");
  if (c.encoder.theme_max_len == 0) throw ConfigError("encoder.theme_max_len: must be positive");
  if (c.encoder.min_freq == 0) throw ConfigError("encoder.min_freq: must be positive");
  if (c.ranker.k_neg < 1) throw ConfigError("ranker.k_neg: must be at least 1");
  if (!(c.ranker.optimizer.learning_rate > 0.0)) throw ConfigError("ranker.learning_rate: must be > 0");
  if (c.ranker.batch_size < 1) throw ConfigError("ranker.batch_size: must be at least 1");
  if (!(c.relation.margin > 0.0)) throw ConfigError("relation.margin: must be > 0");
  if (!(c.relation.optimizer.learning_rate > 0.0)) throw ConfigError("relation.learning_rate: must be > 0");
  if (c.relation.batch_size < 1) throw ConfigError("relation.batch_size: must be at least 1");
  if (!(c.explorer.alpha >= 0.0 && c.explorer.alpha <= 1.0)) throw ConfigError("explorer.alpha: must lie in [0, 1]");
  if (c.explorer.t_min < 2) throw ConfigError("explorer.t_min: must be at least 2");
  if (c.explorer.t_max < c.explorer.t_min) throw ConfigError("explorer.t_max: must be >= explorer.t_min");
  if (c.uift.generator.dim % c.uift.generator.heads != 0) throw ConfigError("uift.heads: must divide uift.dim");
  if (c.uift.generator.context < 8) throw ConfigError("uift.context: must be at least 8");
  if (c.uift.sft.batch_size < 1) throw ConfigError("uift.batch_size: must be at least 1");
  if (c.uift.rank_mode != "recommender" && c.uift.rank_mode != "fixed") {
    throw ConfigError("uift.rank_mode: expected recommender or fixed");
  }
  if (c.eval.k == 0) throw ConfigError("eval.k: must be positive");
  if (c.eval.judge != "builtin" && c.eval.judge != "llm") throw ConfigError("eval.judge: expected builtin or llm");
  for (double a : c.sweep.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep.alphas: values must lie in [0, 1]");
  }
  for (auto t : c.sweep.t_max) {
    if (t < 2) throw ConfigError("sweep.t_max: values must be at least 2");
  }
}

RunConfig demo_config(const fs::path& fixture_dir, const fs::path& output_dir) {
  RunConfig c;
  c.paths.news = fixture_dir / "news.tsv";
  c.paths.behaviors = fixture_dir / "behaviors.tsv";
  c.paths.relation_pairs = fixture_dir / "relation_pairs.tsv";
  c.paths.output_dir = output_dir;
  c.encoder.dim = 32;
  c.encoder.heads = 4;
  c.encoder.min_freq = 1;
  c.ranker.optimizer = {nn::OptimizerKind::kAdam, 1e-3};
  c.ranker.epochs = 5;
  c.ranker.seed = c.seed + 10;
  c.relation.epochs = 10;
  c.relation.seed = c.seed + 11;
  c.uift.sft.seed = c.seed + 12;
  c.uift.uift.seed = c.seed + 13;
  return c;
}

namespace {

struct Workspace {
  const RunConfig& cfg;
  corpus::CorpusStore store;
  std::vector<corpus::Impression> impressions;  // after filtering
  std::size_t raw_impressions = 0;
  bool has_themes = false;

  fs::path out(const std::string& name) const { return cfg.paths.output_dir / name; }
};

fs::path themes_source(const RunConfig& cfg) {
  if (!cfg.paths.themes.empty()) return cfg.paths.themes;
  const auto generated = cfg.paths.output_dir / "themes.tsv";
  return fs::exists(generated) ? generated : fs::path();
}

Workspace open_workspace(const RunConfig& cfg, bool with_themes) {
  validate(cfg);
  fs::create_directories(cfg.paths.output_dir);
  Workspace ws{cfg, corpus::load_news(cfg.paths.news), {}, 0, false};
  if (with_themes) {
    const auto src = themes_source(cfg);
    if (!src.empty()) {
      ws.store = ws.store.with_themes(corpus::load_themes(src, ws.store));
      ws.has_themes = true;
    }
  }
  const auto all = corpus::load_behaviors(cfg.paths.behaviors, ws.store);
  ws.raw_impressions = all.size();
  ws.impressions =
      corpus::filter_impressions(all, cfg.data.min_history, cfg.data.max_history, cfg.data.category, ws.store);
  return ws;
}

void require_themes(const Workspace& ws, const char* command) {
  if (!ws.has_themes) {
    throw DataError(std::string(command) + " needs theme annotations: run annotate-themes or set paths.themes");
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::string> ranker_texts(const corpus::CorpusStore& store) {
  std::vector<std::string> texts;
  for (const auto& a : store.articles()) {
    texts.push_back(ranker::semantic_text(a));
    texts.push_back(ranker::theme_text(a));
  }
  return texts;
}

std::vector<const corpus::NewsArticle*> history_of(const corpus::Impression& imp, const corpus::CorpusStore& store) {
  std::vector<const corpus::NewsArticle*> out;
  for (const auto& id : imp.history) out.push_back(&store.at(id));
  return out;
}

const corpus::Impression& impression_by_id(const Workspace& ws, const std::string& id) {
  for (const auto& imp : ws.impressions) {
    if (imp.impression_id == id) return imp;
  }
  throw DataError("impression " + id + " is not among the filtered impressions");
}

std::string terminated(const std::string& s) {
  if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') return s + ".";
  return s;
}

std::string condition_text(const explorer::ReferenceNewsSet& set, const corpus::CorpusStore& store) {
  std::vector<std::string> parts;
  for (const auto& id : set.ids()) parts.push_back(terminated(store.at(id).title));
  return text::join(parts, " ");
}

CommandResult cmd_ingest(const RunConfig& cfg) {
  // Only configured inputs count here, never earlier outputs, so reruns match.
  auto ws = open_workspace(cfg, false);
  if (!cfg.paths.themes.empty()) {
    ws.store = ws.store.with_themes(corpus::load_themes(cfg.paths.themes, ws.store));
    ws.has_themes = true;
  }
  std::size_t pairs = 0;
  if (!cfg.paths.relation_pairs.empty()) pairs = corpus::load_relation_pairs(cfg.paths.relation_pairs, ws.store).pairs.size();
  std::map<std::string, std::size_t> categories;
  for (const auto& a : ws.store.articles()) ++categories[a.category];
  json stats = {{"articles", ws.store.size()},
                {"categories", categories},
                {"impressions", ws.raw_impressions},
                {"filtered_impressions", ws.impressions.size()},
                {"filter",
                 {{"category", cfg.data.category},
                  {"min_history", cfg.data.min_history},
                  {"max_history", cfg.data.max_history}}},
                {"relation_pairs", pairs},
                {"themes_loaded", ws.has_themes}};
  write_json(ws.out("stats.json"), stats);
  return {{ws.out("stats.json")}, stats};
}

CommandResult cmd_annotate(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, false);
  llm::Gateway gateway(cfg.provider);
  const auto themes = llm::annotate_themes(ws.store, gateway);
  corpus::write_themes(themes, ws.out("themes.tsv"));
  return {{ws.out("themes.tsv")}, {{"annotated", themes.size()}, {"provider", llm::to_string(cfg.provider.kind)}}};
}

CommandResult cmd_profiles(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  require_themes(ws, "profile-users");
  llm::Gateway gateway(cfg.provider);
  std::vector<llm::UserInterestProfile> profiles(ws.impressions.size());
  parallel_for(ws.impressions.size(), cfg.provider.max_parallel, [&](std::size_t i) {
    const auto& imp = ws.impressions[i];
    profiles[i] = llm::build_profile(imp.impression_id, history_of(imp, ws.store), gateway);
  });
  llm::write_profiles(profiles, ws.out("profiles.jsonl"));
  return {{ws.out("profiles.jsonl")}, {{"profiles", profiles.size()}}};
}

CommandResult cmd_train_ranker(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  if (cfg.news_view != ranker::View::kSemantic || cfg.user_view != ranker::View::kSemantic) {
    require_themes(ws, "train-ranker");
  }
  auto vocab = textenc::Vocabulary::build(ranker_texts(ws.store), cfg.encoder.min_freq);
  ranker::RankerModel model(std::move(vocab), cfg.encoder, cfg.news_view, cfg.user_view, cfg.seed);
  const auto report = ranker::train_ranker(model, ws.impressions, ws.store, cfg.ranker);
  ranker::save_ranker(model, ws.out("ranker"));
  json summary = {{"loss_trace", report.loss_trace},
                  {"samples", report.samples},
                  {"skipped_impressions", report.skipped_impressions},
                  {"sampled_with_replacement", report.sampled_with_replacement},
                  {"vocab_size", model.vocab().size()},
                  {"news_view", ranker::to_string(cfg.news_view)},
                  {"user_view", ranker::to_string(cfg.user_view)}};
  if (report.skipped_impressions > 0) spdlog::warn("train-ranker skipped {} impressions", report.skipped_impressions);
  write_json(ws.out("ranker_report.json"), summary);
  return {{textenc::manifest_path(ws.out("ranker")), textenc::blob_path(ws.out("ranker")), ws.out("ranker_report.json")},
          summary};
}

CommandResult cmd_train_relation(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, false);
  if (cfg.paths.relation_pairs.empty()) throw ConfigError("paths.relation_pairs: required by train-relation");
  const auto pairs = corpus::load_relation_pairs(cfg.paths.relation_pairs, ws.store);
  std::vector<std::string> texts;
  for (const auto& a : ws.store.articles()) texts.push_back(ranker::semantic_text(a));
  relation::RelationModel model(textenc::Vocabulary::build(texts, cfg.encoder.min_freq), cfg.encoder, cfg.seed + 1);
  const auto report = relation::train_relation(model, pairs, ws.store, cfg.relation);
  relation::save_relation(model, ws.out("relation"));
  relation::EmbeddingCache cache(model.version());
  cache.fill(ws.store, model);
  cache.save(ws.out("relation_embeddings"));
  json summary = {{"loss_trace", report.loss_trace},
                  {"triplets_per_epoch", report.triplets_per_epoch},
                  {"model_version", model.version()}};
  write_json(ws.out("relation_report.json"), summary);
  return {{textenc::manifest_path(ws.out("relation")), textenc::blob_path(ws.out("relation")),
           textenc::manifest_path(ws.out("relation_embeddings")), textenc::blob_path(ws.out("relation_embeddings")),
           ws.out("relation_report.json")},
          summary};
}

relation::EmbeddingCache open_cache(const Workspace& ws, const relation::RelationModel& model) {
  const auto prefix = ws.out("relation_embeddings");
  if (fs::exists(textenc::manifest_path(prefix))) {
    try {
      return relation::EmbeddingCache::load(prefix, model.version());
    } catch (const DataError& e) {
      spdlog::warn("ignoring stale embedding cache: {}", e.what());
    }
  }
  relation::EmbeddingCache cache(model.version());
  cache.fill(ws.store, model);
  return cache;
}

std::vector<explorer::BuildOutcome> build_all(const Workspace& ws, const ranker::RankerModel& rk,
                                              const relation::RelationModel& rel, relation::EmbeddingCache& cache,
                                              const explorer::ExplorerConfig& ec) {
  std::vector<explorer::BuildOutcome> out(ws.impressions.size());
  parallel_for(ws.impressions.size(), 4, [&](std::size_t i) {
    out[i] = explorer::build_reference_set(ws.impressions[i], rk, rel, ws.store, ec, &cache);
  });
  return out;
}

json outcome_summary(const std::vector<explorer::BuildOutcome>& outcomes) {
  std::size_t excluded = 0, total_size = 0, kept = 0;
  for (const auto& o : outcomes) {
    if (o.insufficient) {
      ++excluded;
    } else {
      ++kept;
      total_size += o.set.size();
    }
  }
  return {{"sets", outcomes.size()},
          {"excluded", excluded},
          {"kept", kept},
          {"mean_size", kept ? static_cast<double>(total_size) / static_cast<double>(kept) : 0.0}};
}

CommandResult cmd_build_refsets(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  const auto rk = ranker::load_ranker(ws.out("ranker"));
  const auto rel = relation::load_relation(ws.out("relation"));
  auto cache = open_cache(ws, rel);
  const auto outcomes = build_all(ws, rk, rel, cache, cfg.explorer);
  explorer::write_reference_sets(outcomes, ws.out("refsets.jsonl"));
  return {{ws.out("refsets.jsonl")}, outcome_summary(outcomes)};
}

std::map<std::string, llm::UserInterestProfile> profiles_by_key(const Workspace& ws) {
  const auto path = ws.out("profiles.jsonl");
  if (!fs::exists(path)) throw DataError("missing " + path.string() + ": run profile-users first");
  std::map<std::string, llm::UserInterestProfile> out;
  for (auto& p : llm::read_profiles(path)) out.emplace(p.user_key, std::move(p));
  return out;
}

std::vector<fusion::Narrative> fuse_outcomes(const Workspace& ws, const std::vector<explorer::BuildOutcome>& outcomes,
                                             const std::map<std::string, llm::UserInterestProfile>& profiles,
                                             llm::Gateway& gateway) {
  std::vector<fusion::FusionJob> jobs;
  for (const auto& o : outcomes) {
    if (o.insufficient) continue;
    auto it = profiles.find(o.set.impression_id);
    if (it == profiles.end()) throw DataError("no user profile for impression " + o.set.impression_id);
    jobs.push_back({&o.set, &it->second});
  }
  return fusion::fuse_all(jobs, ws.store, gateway);
}

std::vector<explorer::BuildOutcome> read_outcomes(const Workspace& ws) {
  const auto path = ws.out("refsets.jsonl");
  if (!fs::exists(path)) throw DataError("missing " + path.string() + ": run build-refsets first");
  return explorer::read_reference_sets(path);
}

std::vector<fusion::Narrative> read_narratives(const Workspace& ws) {
  const auto path = ws.out("narratives.jsonl");
  if (!fs::exists(path)) throw DataError("missing " + path.string() + ": run fuse first");
  return fusion::read_narratives(path);
}

CommandResult cmd_fuse(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  const auto outcomes = read_outcomes(ws);
  const auto profiles = profiles_by_key(ws);
  llm::Gateway gateway(cfg.provider);
  const auto narratives = fuse_outcomes(ws, outcomes, profiles, gateway);
  fusion::write_narratives(narratives, ws.out("narratives.jsonl"));
  std::vector<std::size_t> lengths;
  for (const auto& n : narratives) lengths.push_back(text::word_count(n.abstract));
  return {{ws.out("narratives.jsonl")}, {{"narratives", narratives.size()}, {"abstract_words", lengths}}};
}

CommandResult cmd_train_uift(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  const auto outcomes = read_outcomes(ws);
  const auto narratives = read_narratives(ws);
  std::map<std::string, const explorer::ReferenceNewsSet*> sets;
  for (const auto& o : outcomes) sets[o.set.impression_id] = &o.set;
  if (narratives.empty()) throw DataError("train-uift: no narratives to learn from");

  std::vector<uift::SftExample> sft;
  std::vector<std::string> texts;
  for (const auto& n : narratives) {
    const auto* set = sets.at(n.impression_id);
    sft.push_back({condition_text(*set, ws.store), n.abstract});
    texts.push_back(sft.back().condition);
    texts.push_back(n.title + " " + n.abstract);
    const auto& focal = ws.store.at(set->focal);
    texts.push_back(focal.title + " " + focal.abstract);
  }
  uift::ToyGenerator gen(uift::generator_vocabulary(texts), cfg.uift.generator, cfg.seed + 2);
  const auto sft_trace = uift::train_sft(gen, sft, cfg.uift.sft);
  uift::save_generator(gen, ws.out("generator_sft"));

  const auto ranker_model = ranker::load_ranker(ws.out("ranker"));
  std::vector<uift::NarrativeTriple> triples;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < narratives.size(); ++i) {
    const auto& n = narratives[i];
    const auto* set = sets.at(n.impression_id);
    const auto& focal = ws.store.at(set->focal);
    uift::NarrativeTriple t;
    t.condition = sft[i].condition;
    t.texts[uift::kGnr] = uift::generate(gen, t.condition, cfg.uift.max_tokens);
    t.texts[uift::kChatgpt] = terminated(n.title) + " " + n.abstract;
    t.texts[uift::kFocal] = terminated(focal.title) + " " + focal.abstract;
    if (text::words(t.texts[uift::kGnr]).empty()) {
      ++skipped;
      continue;
    }
    t.ranks = cfg.uift.rank_mode == "fixed"
                  ? uift::Ranks{1, 2, 3}
                  : uift::rank_triple(ranker_model, impression_by_id(ws, n.impression_id), ws.store, t.texts);
    t.has_ranks = true;
    triples.push_back(std::move(t));
  }
  uift::write_triples(triples, ws.out("triples.jsonl"));
  json summary = {{"sft_loss_trace", sft_trace}, {"triples", triples.size()}, {"skipped_empty_generations", skipped}};
  std::vector<fs::path> artifacts = {textenc::manifest_path(ws.out("generator_sft")),
                                     textenc::blob_path(ws.out("generator_sft")), ws.out("triples.jsonl")};
  if (!triples.empty()) {
    const auto report = uift::train_uift(gen, triples, cfg.uift.uift);
    uift::save_generator(gen, ws.out("generator"));
    summary["violation_trace"] = report.violation_trace;
    summary["uift_loss_trace"] = report.loss_trace;
    artifacts.push_back(textenc::manifest_path(ws.out("generator")));
    artifacts.push_back(textenc::blob_path(ws.out("generator")));
  }
  write_json(ws.out("uift_report.json"), summary);
  artifacts.push_back(ws.out("uift_report.json"));
  return {artifacts, summary};
}

CommandResult cmd_eval_rank(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  const auto model = ranker::load_ranker(ws.out("ranker"));
  std::vector<eval::ImpressionScores> all(ws.impressions.size());
  parallel_for(ws.impressions.size(), 4, [&](std::size_t i) {
    const auto& imp = ws.impressions[i];
    const Vector user = model.user_vector(imp, ws.store);
    for (const auto& c : imp.candidates) {
      all[i].push_back({ranker::score_pair(user, model.news_vector(ws.store.at(c.news_id))), c.clicked});
    }
  });
  const auto rep = eval::ranking_metrics(all, cfg.eval.k);
  json per = json::array();
  for (std::size_t i = 0; i < rep.per_impression.size(); ++i) {
    const auto& m = rep.per_impression[i];
    per.push_back({{"impression_id", ws.impressions[i].impression_id},
                   {"auc", m.auc_defined ? json(m.auc) : json(nullptr)},
                   {"mrr", m.mrr},
                   {"ndcg", m.ndcg}});
  }
  json summary = {{"auc", rep.auc},         {"mrr", rep.mrr},
                  {"ndcg_at_k", rep.ndcg},  {"k", rep.k},
                  {"samples", rep.samples}, {"auc_excluded", rep.auc_excluded},
                  {"per_impression", per}};
  write_json(ws.out("rank_metrics.json"), summary);
  return {{ws.out("rank_metrics.json")}, summary};
}

std::unique_ptr<eval::Judge> make_judge(const RunConfig& cfg, llm::Gateway& gateway) {
  if (cfg.eval.judge == "llm") return std::make_unique<eval::LlmJudge>(gateway);
  return std::make_unique<eval::BuiltinJudge>();
}

json consistency_json(const eval::ConsistencyCounts& c) {
  return {{"consistent", c.consistent},
          {"inconsistent", c.inconsistent},
          {"judge_failures", c.judge_failures},
          {"percent", c.percent()}};
}

std::vector<explorer::ReferenceNewsSet> matching_sets(const std::vector<explorer::BuildOutcome>& outcomes,
                                                      const std::vector<fusion::Narrative>& narratives) {
  std::map<std::string, const explorer::ReferenceNewsSet*> by_id;
  for (const auto& o : outcomes) by_id[o.set.impression_id] = &o.set;
  std::vector<explorer::ReferenceNewsSet> out;
  for (const auto& n : narratives) {
    auto it = by_id.find(n.impression_id);
    if (it == by_id.end()) throw DataError("narrative " + n.impression_id + " has no reference set");
    out.push_back(*it->second);
  }
  return out;
}

CommandResult cmd_eval_gen(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  const auto outcomes = read_outcomes(ws);
  const auto narratives = read_narratives(ws);
  const auto sets = matching_sets(outcomes, narratives);
  const auto model = ranker::load_ranker(ws.out("ranker"));
  std::vector<const corpus::NewsArticle*> focals;
  std::vector<const corpus::Impression*> contexts;
  for (const auto& s : sets) {
    focals.push_back(&ws.store.at(s.focal));
    contexts.push_back(&impression_by_id(ws, s.impression_id));
  }
  const auto wins = eval::win_rate(narratives, focals, model, contexts, ws.store);
  llm::Gateway gateway(cfg.provider);
  auto judge = make_judge(cfg, gateway);
  const auto cons = eval::consistency_rate(sets, narratives, ws.store, *judge);
  json summary = {{"win_rate",
                   {{"wins", wins.wins}, {"ties", wins.ties}, {"losses", wins.losses}, {"percent", wins.percent()}}},
                  {"consistency", consistency_json(cons)},
                  {"judge", judge->name()},
                  {"narratives", narratives.size()}};
  write_json(ws.out("gen_metrics.json"), summary);
  return {{ws.out("gen_metrics.json")}, summary};
}

CommandResult cmd_sweep(const RunConfig& cfg) {
  auto ws = open_workspace(cfg, true);
  const auto rk = ranker::load_ranker(ws.out("ranker"));
  const auto rel = relation::load_relation(ws.out("relation"));
  auto cache = open_cache(ws, rel);
  const auto profiles = profiles_by_key(ws);
  llm::Gateway gateway(cfg.provider);
  auto judge = make_judge(cfg, gateway);

  auto run = [&](const explorer::ExplorerConfig& ec) {
    const auto outcomes = build_all(ws, rk, rel, cache, ec);
    const auto narratives = fuse_outcomes(ws, outcomes, profiles, gateway);
    const auto cons = eval::consistency_rate(matching_sets(outcomes, narratives), narratives, ws.store, *judge);
    json row = outcome_summary(outcomes);
    row["consistency"] = consistency_json(cons);
    return row;
  };

  json alpha_rows = json::array();
  for (double a : cfg.sweep.alphas) {
    auto ec = cfg.explorer;
    ec.alpha = a;
    auto row = run(ec);
    row["alpha"] = a;
    alpha_rows.push_back(row);
  }
  json tmax_rows = json::array();
  for (auto t : cfg.sweep.t_max) {
    auto ec = cfg.explorer;
    ec.t_max = t;
    ec.t_min = std::min(ec.t_min, t);
    auto row = run(ec);
    row["t_max"] = t;
    row["t_min"] = ec.t_min;
    tmax_rows.push_back(row);
  }
  json summary = {{"alpha", alpha_rows}, {"t_max", tmax_rows}};
  write_json(ws.out("sweep.json"), summary);
  return {{ws.out("sweep.json")}, summary};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"ingest",        "annotate-themes", "profile-users", "train-ranker",
                                                 "train-relation", "build-refsets",  "fuse",          "train-uift",
                                                 "eval-rank",     "eval-gen",        "sweep"};
  return names;
}

CommandResult run_command(const std::string& command, const RunConfig& config) {
  if (command == "ingest") return cmd_ingest(config);
  if (command == "annotate-themes") return cmd_annotate(config);
  if (command == "profile-users") return cmd_profiles(config);
  if (command == "train-ranker") return cmd_train_ranker(config);
  if (command == "train-relation") return cmd_train_relation(config);
  if (command == "build-refsets") return cmd_build_refsets(config);
  if (command == "fuse") return cmd_fuse(config);
  if (command == "train-uift") return cmd_train_uift(config);
  if (command == "eval-rank") return cmd_eval_rank(config);
  if (command == "eval-gen") return cmd_eval_gen(config);
  if (command == "sweep") return cmd_sweep(config);
  if (command == "demo") return run_demo(config);
  throw ConfigError("unknown command '" + command + "'");
}

CommandResult run_demo(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.provider.kind = llm::ProviderKind::kStub;
  cfg.provider.cache_mode = llm::CacheMode::kOff;
  cfg.eval.judge = "builtin";
  CommandResult all;
  json stages = json::object();
  for (const auto& name : command_names()) {
    auto res = run_command(name, cfg);
    stages[name] = res.summary;
    all.artifacts.insert(all.artifacts.end(), res.artifacts.begin(), res.artifacts.end());
  }
  json report = {{"header", {{"generated_at", utc_now()}, {"tool", "gnr"}, {"format", "gnr-report-v1"}}},
                 {"environment",
                  {{"seed", cfg.seed},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__},
                   {"provider", llm::to_string(cfg.provider.kind)}}},
                 {"config", to_json(cfg)},
                 {"stages", stages}};
  const auto path = cfg.paths.output_dir / "report.json";
  write_json(path, report);
  all.artifacts.push_back(path);
  all.summary = report;
  return all;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const ProviderError*>(&e) != nullptr) return 4;
  if (dynamic_cast<const ParseError*>(&e) != nullptr) return 4;
  return 5;
}

}  // namespace gnr::pipeline
