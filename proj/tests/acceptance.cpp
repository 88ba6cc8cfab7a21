// Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

#include "gnr/checkpoint.hpp"
#include "gnr/eval.hpp"
#include "gnr/explorer.hpp"
#include "gnr/grad_check.hpp"
#include "gnr/pipeline.hpp"
#include "gnr/text_util.hpp"
#include "synthetic.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <unistd.h>

#ifndef GNR_FIXTURE_DIR
#error "GNR_FIXTURE_DIR must be defined"
#endif

namespace {

namespace fs = std::filesystem;
using namespace gnr;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_root() {
  static const fs::path root = [] {
    auto p = fs::temp_directory_path() / ("gnr-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// ---------------------------------------------------------------- criterion 1

struct OracleMetrics {
  double auc = 0, mrr = 0, ndcg = 0;
  bool auc_defined = false;
};

// Definition-level metrics by exhaustive pair counting and explicit rank positions.
OracleMetrics oracle(const eval::ImpressionScores& s, std::size_t k) {
  OracleMetrics m;
  double pairs = 0, wins = 0;
  for (const auto& p : s) {
    if (!p.clicked) continue;
    for (const auto& n : s) {
      if (n.clicked) continue;
      pairs += 1;
      wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
    }
  }
  m.auc_defined = pairs > 0;
  m.auc = m.auc_defined ? wins / pairs : 0.0;
  // rank of item i: 1 + items strictly better, or equal and earlier in the input.
  auto rank_of = [&](std::size_t i) {
    std::size_t r = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j].score > s[i].score || (s[j].score == s[i].score && j < i)) ++r;
    }
    return r;
  };
  std::size_t best = 0, positives = 0;
  double dcg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i].clicked) continue;
    ++positives;
    const auto r = rank_of(i);
    if (best == 0 || r < best) best = r;
    if (r <= k) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  m.mrr = best ? 1.0 / static_cast<double>(best) : 0.0;
  double idcg = 0;
  for (std::size_t r = 1; r <= std::min(positives, k); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  m.ndcg = idcg > 0 ? dcg / idcg : 0.0;
  return m;
}

Outcome criterion_metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::vector<eval::ImpressionScores> imps;
  for (int i = 0; i < 1000; ++i) {
    eval::ImpressionScores s(1 + rng.below(8));
    for (auto& x : s) {
      // Coarse scores on half the impressions force ties.
      x.score = i % 2 ? static_cast<double>(rng.below(4)) : rng.uniform(-3, 3);
      x.clicked = rng.below(3) == 0;
    }
    imps.push_back(s);
  }
  const std::size_t k = 5;
  const auto rep = eval::ranking_metrics(imps, k);
  double max_diff = 0, auc_sum = 0, mrr_sum = 0, ndcg_sum = 0;
  std::size_t auc_n = 0;
  for (std::size_t i = 0; i < imps.size(); ++i) {
    const auto o = oracle(imps[i], k);
    const auto& m = rep.per_impression[i];
    if (o.auc_defined != m.auc_defined) return {false, "AUC definedness differs at impression " + std::to_string(i)};
    if (o.auc_defined) {
      max_diff = std::max(max_diff, std::abs(o.auc - m.auc));
      auc_sum += o.auc;
      ++auc_n;
    }
    max_diff = std::max({max_diff, std::abs(o.mrr - m.mrr), std::abs(o.ndcg - m.ndcg)});
    mrr_sum += o.mrr;
    ndcg_sum += o.ndcg;
  }
  max_diff = std::max({max_diff, std::abs(auc_sum / auc_n - rep.auc), std::abs(mrr_sum / 1000 - rep.mrr),
                       std::abs(ndcg_sum / 1000 - rep.ndcg)});
  const double secs = seconds_since(t0);
  return {max_diff < 1e-12 && secs < 10.0,
          "max |delta| = " + fmt_sci(max_diff) + " over 1000 impressions, " + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------- criterion 2

corpus::CorpusStore small_store(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  corpus::CorpusStore store;
  for (std::size_t i = 0; i < n; ++i) {
    corpus::NewsArticle a;
    a.id = "A" + std::to_string(i);
    a.category = "politics";
    a.title = testing::random_words(rng, "w", 12, 4);
    a.abstract = testing::random_words(rng, "w", 12, 5);
    a.theme_topics = std::vector<std::string>{testing::random_words(rng, "t", 6, 2)};
    store.add(std::move(a));
  }
  return store;
}

textenc::Vocabulary store_vocab(const corpus::CorpusStore& store) {
  std::vector<std::string> texts;
  for (const auto& a : store.articles()) {
    texts.push_back(ranker::semantic_text(a));
    texts.push_back(ranker::theme_text(a));
  }
  return textenc::Vocabulary::build(texts, 1);
}

std::string report_line(const textenc::GradCheckReport& r) {
  return r.loss_name + " " + std::to_string(r.total_probes) + " probes max rel " + fmt_sci(r.max_rel_error);
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  textenc::GradCheckOptions opts;
  opts.probes_per_tensor = 20;
  opts.tolerance = 1e-4;
  std::vector<textenc::GradCheckReport> reports;

  {  // combiner
    Rng rng(11);
    nn::MultiViewCombiner comb("combiner", 6);
    auto params = comb.params();
    nn::init_uniform(params, rng, 0.5);
    Vector es = Vector::NullaryExpr(6, [&] { return rng.uniform(-1, 1); });
    Vector et = Vector::NullaryExpr(6, [&] { return rng.uniform(-1, 1); });
    Vector c = Vector::NullaryExpr(6, [&] { return rng.uniform(-1, 1); });
    reports.push_back(textenc::grad_check(
        "combiner",
        [&](bool with_grad) {
          nn::MultiViewCombiner::Cache cache;
          const auto out = comb.forward(es, et, &cache);
          if (with_grad) comb.backward(cache, c);
          return c.dot(out.dual);
        },
        params, opts));
  }
  {  // ranking loss
    const auto store = small_store(12, 5);
    textenc::EncoderConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.max_len = 8;
    cfg.theme_max_len = 4;
    cfg.min_freq = 1;
    cfg.init_scale = 0.5;
    ranker::RankerModel model(store_vocab(store), cfg, ranker::View::kDual, ranker::View::kDual, 3);
    std::vector<ranker::RankingSample> samples = {
        {{"A0", "A1", "A2"}, "A3", {"A4", "A5", "A6"}},
        {{"A7", "A8"}, "A9", {"A10", "A11", "A0"}},
    };
    reports.push_back(textenc::grad_check(
        "ranking",
        [&](bool with_grad) { return ranker::ranking_batch_loss(model, samples, store, with_grad); },
        model.params(), opts));
  }
  {  // triplet loss, active and away from the hinge kink
    const auto store = small_store(12, 9);
    textenc::EncoderConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.max_len = 8;
    cfg.min_freq = 1;
    cfg.init_scale = 0.5;
    std::vector<std::string> texts;
    for (const auto& a : store.articles()) texts.push_back(ranker::semantic_text(a));
    relation::RelationModel model(textenc::Vocabulary::build(texts, 1), cfg, 4);
    const double margin = 1.0;
    std::vector<relation::Triplet> triplets;
    for (std::size_t i = 0; i + 2 < store.size(); i += 3) {
      relation::Triplet t{store.articles()[i].id, store.articles()[i + 1].id, store.articles()[i + 2].id};
      auto unit = [&](const std::string& id) {
        Vector e = model.embed(store.at(id));
        return Vector(e / e.norm());
      };
      const double slack = (unit(t.anchor) - unit(t.positive)).norm() - (unit(t.anchor) - unit(t.negative)).norm() +
                           margin;
      if (std::abs(slack) > 1e-3) triplets.push_back(t);
    }
    reports.push_back(textenc::grad_check(
        "triplet",
        [&](bool with_grad) { return relation::triplet_batch_loss(model, triplets, store, margin, with_grad); },
        model.params(), opts));
  }
  {  // UIFT loss
    auto task = testing::make_uift_task(3, 6, 0);
    std::vector<std::string> texts = task.texts;
    uift::GeneratorConfig gc;
    gc.dim = 8;
    gc.heads = 2;
    gc.context = 24;
    gc.init_scale = 0.5;
    uift::ToyGenerator gen(uift::generator_vocabulary(texts), gc, 5);
    // Keep only triples whose three probabilities are well separated.
    std::vector<uift::NarrativeTriple> triples;
    for (const auto& t : task.train) {
      std::array<double, 3> p;
      for (std::size_t k = 0; k < 3; ++k) p[k] = uift::seq_logprob_norm(gen, t.condition, t.texts[k]);
      if (std::abs(p[0] - p[1]) > 1e-3 && std::abs(p[1] - p[2]) > 1e-3 && std::abs(p[0] - p[2]) > 1e-3) {
        triples.push_back(t);
      }
    }
    reports.push_back(textenc::grad_check(
        "uift", [&](bool with_grad) { return uift::uift_batch_loss(gen, triples, with_grad); }, gen.params(), opts));
  }
  bool ok = true;
  std::string detail;
  for (const auto& r : reports) {
    ok = ok && r.passed && r.total_probes >= 20;
    detail += (detail.empty() ? "" : "; ") + report_line(r);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 30.0, detail + ", " + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------- criterion 3

double heldout_auc(const ranker::RankerModel& model, const std::vector<corpus::Impression>& imps,
                   const corpus::CorpusStore& store) {
  std::vector<eval::ImpressionScores> all;
  for (const auto& imp : imps) {
    const Vector user = model.user_vector(imp, store);
    eval::ImpressionScores s;
    for (const auto& c : imp.candidates) s.push_back({ranker::score_pair(user, model.news_vector(store.at(c.news_id))), c.clicked});
    all.push_back(s);
  }
  return eval::ranking_metrics(all, 5).auc;
}

Outcome criterion_dual_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  double dual_sum = 0, sem_sum = 0;
  std::string per_seed;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto task = testing::make_theme_task(100 + seed);
    textenc::EncoderConfig cfg;
    cfg.dim = 32;
    cfg.heads = 4;
    cfg.max_len = 16;
    cfg.theme_max_len = 4;
    cfg.min_freq = 1;
    ranker::TrainConfig tc;
    tc.k_neg = 4;
    tc.optimizer = {nn::OptimizerKind::kAdam, 1e-3};
    tc.epochs = 4;
    tc.batch_size = 16;
    tc.seed = 7 + seed;
    double aucs[2];
    const ranker::View views[2] = {ranker::View::kDual, ranker::View::kSemantic};
    for (int v = 0; v < 2; ++v) {
      ranker::RankerModel model(store_vocab(task.store), cfg, views[v], views[v], 1000 + seed);
      ranker::train_ranker(model, task.train, task.store, tc);
      aucs[v] = heldout_auc(model, task.test, task.store);
    }
    dual_sum += aucs[0];
    sem_sum += aucs[1];
    per_seed += (per_seed.empty() ? "" : " ") + fmt(aucs[0], 3) + "/" + fmt(aucs[1], 3);
  }
  const double dual = dual_sum / seeds, sem = sem_sum / seeds;
  const double secs = seconds_since(t0);
  return {dual - sem >= 0.02 && secs < 300.0, "dual/dual AUC " + fmt(dual) + " vs sem/sem " + fmt(sem) +
                                                  " (gap " + fmt(dual - sem) + "; per seed " + per_seed + "), " +
                                                  fmt(secs, 1) + " s"};
}

// ---------------------------------------------- shared fixture demo run (7-10)

struct DemoRun {
  fs::path dir;
  double seconds = 0;
  pipeline::RunConfig config;
};

DemoRun& demo_run() {
  static DemoRun run = [] {
    DemoRun r;
    r.dir = work_root() / "demo";
    r.config = pipeline::demo_config(GNR_FIXTURE_DIR, r.dir);
    const auto t0 = std::chrono::steady_clock::now();
    pipeline::run_demo(r.config);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

corpus::CorpusStore demo_store(const DemoRun& run) {
  auto store = corpus::load_news(run.config.paths.news);
  return store.with_themes(corpus::load_themes(run.dir / "themes.tsv", store));
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion_threshold_nesting() {
  const auto& run = demo_run();
  const auto store = demo_store(run);
  const auto model = relation::load_relation(run.dir / "relation");
  relation::EmbeddingCache cache(model.version());
  std::size_t focals = 0, checks = 0;
  for (const auto& a : store.articles()) {
    std::vector<std::vector<std::string>> sets;
    for (double alpha : {0.6, 0.7, 0.8}) {
      std::vector<std::string> ids;
      for (const auto& r : relation::explore_related(a.id, store, model, alpha, &cache)) ids.push_back(r.id);
      std::sort(ids.begin(), ids.end());
      sets.push_back(ids);
    }
    for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
      ++checks;
      if (!std::includes(sets[i].begin(), sets[i].end(), sets[i + 1].begin(), sets[i + 1].end())) {
        return {false, "nesting broken for focal " + a.id};
      }
    }
    ++focals;
  }
  return {focals == store.size(), std::to_string(focals) + " focals, " + std::to_string(checks) + " nested pairs"};
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion_uift() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto task = testing::make_uift_task(17, 50, 50);
  std::vector<std::string> texts = task.texts;
  uift::GeneratorConfig gc;
  gc.dim = 32;
  gc.heads = 2;
  gc.context = 32;
  uift::ToyGenerator gen(uift::generator_vocabulary(texts), gc, 21);
  uift::GenTrainConfig sft_cfg{{nn::OptimizerKind::kAdam, 1e-2}, 20, 8, 5};
  uift::train_sft(gen, task.sft, sft_cfg);
  const double before = uift::violation_rate(gen, task.heldout);
  uift::GenTrainConfig uift_cfg{{nn::OptimizerKind::kAdam, 1e-3}, 10, 8, 6};
  uift::train_uift(gen, task.train, uift_cfg);
  const double after = uift::violation_rate(gen, task.heldout);
  const double drop = before > 0 ? (before - after) / before : 0.0;
  const double secs = seconds_since(t0);
  return {before > 0 && drop >= 0.30 && secs < 300.0,
          "held-out violation rate " + fmt(before) + " -> " + fmt(after) + " (relative drop " + fmt(100 * drop, 1) +
              "%), " + fmt(secs, 1) + " s"};
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion_win_rate() {
  // One strict win, one loss, one exact tie.
  const auto c = eval::win_rate_from_scores({{0.9, 0.5}, {0.2, 0.8}, {0.6, 0.6}});
  const double pct = c.percent();
  const bool ok = c.wins == 1 && c.losses == 1 && c.ties == 1 && std::abs(pct - 100.0 / 3.0) < 1e-9 &&
                  std::abs(pct - 33.33) < 0.005;
  return {ok, "wins " + std::to_string(c.wins) + ", ties " + std::to_string(c.ties) + ", losses " +
                  std::to_string(c.losses) + " -> " + fmt(pct, 2) + "%"};
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion_stub_consistency() {
  const auto& run = demo_run();
  std::ifstream in(run.dir / "gen_metrics.json");
  const auto j = nlohmann::json::parse(in);
  const auto& c = j.at("consistency");
  const auto consistent = c.at("consistent").get<std::size_t>();
  const auto judged = consistent + c.at("inconsistent").get<std::size_t>();
  const auto failures = c.at("judge_failures").get<std::size_t>();
  const double pct = c.at("percent").get<double>();
  const bool ok = judged > 0 && failures == 0 && consistent == judged && pct == 100.0 &&
                  j.at("judge").get<std::string>() == "builtin-extractive";
  return {ok, std::to_string(consistent) + "/" + std::to_string(judged) + " narratives consistent (" + fmt(pct, 2) +
                  "%), judge failures " + std::to_string(failures)};
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_refset_invariants() {
  const auto& run = demo_run();
  const auto store = demo_store(run);
  const auto rk = ranker::load_ranker(run.dir / "ranker");
  const auto rel = relation::load_relation(run.dir / "relation");
  relation::EmbeddingCache cache(rel.version());
  const auto all = corpus::load_behaviors(run.config.paths.behaviors, store);
  const auto imps = corpus::filter_impressions(all, run.config.data.min_history, run.config.data.max_history,
                                               run.config.data.category, store);
  // The demo's own output first.
  const auto written = explorer::read_reference_sets(run.dir / "refsets.jsonl");
  if (written.size() != imps.size()) return {false, "refsets.jsonl does not cover every impression"};

  std::size_t built = 0, insufficient = 0;
  std::vector<std::tuple<double, std::size_t, std::size_t>> grid;
  for (double a : {0.6, 0.7, 0.8}) grid.emplace_back(a, 3, 4);
  for (std::size_t t : {2, 3, 4, 5, 6}) grid.emplace_back(0.8, std::min<std::size_t>(3, t), t);
  for (std::size_t t_min : {2, 3, 4, 5}) grid.emplace_back(0.8, t_min, 5);
  for (const auto& [alpha, t_min, t_max] : grid) {
    explorer::ExplorerConfig ec;
    ec.alpha = alpha;
    ec.t_min = t_min;
    ec.t_max = t_max;
    for (const auto& imp : imps) {
      const auto out = explorer::build_reference_set(imp, rk, rel, store, ec, &cache);
      const auto& set = out.set;
      ++built;
      if (set.size() > t_max) return {false, imp.impression_id + ": set exceeds T_max"};
      const auto ranked = ranker::rank_candidates(rk, imp, store);
      if (set.focal != ranked.front().news_id) return {false, imp.impression_id + ": focal is not the top-ranked"};
      for (const auto& r : set.related) {
        if (r.id == set.focal) return {false, imp.impression_id + ": focal repeated among related"};
        const double s = relation::relation_score(store.at(set.focal), store.at(r.id), rel);
        if (s < alpha) return {false, imp.impression_id + ": related item below alpha"};
      }
      explorer::check_invariants(set, alpha);
      const std::size_t available = relation::explore_related(set.focal, store, rel, alpha, &cache).size();
      const std::size_t expected_related = std::min(available, t_max - 1);
      if (set.related.size() != expected_related) return {false, imp.impression_id + ": wrong related count"};
      const bool expect_insufficient = 1 + set.related.size() < t_min;
      if (out.insufficient != expect_insufficient) return {false, imp.impression_id + ": Insufficient flag wrong"};
      insufficient += out.insufficient;
    }
  }
  for (const auto& w : written) {
    explorer::check_invariants(w.set, run.config.explorer.alpha);
    if (w.insufficient != (w.set.size() < run.config.explorer.t_min)) return {false, "written Insufficient flag wrong"};
  }
  return {true, std::to_string(built) + " sets over " + std::to_string(grid.size()) + " (alpha, T_min, T_max) settings, " +
                    std::to_string(insufficient) + " insufficient"};
}

// ---------------------------------------------------------------- criterion 9

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string body = ss.str();
    if (e.path().filename() == "report.json") {
      auto j = nlohmann::json::parse(body);
      j.erase("header");
      body = j.dump();
    }
    files[fs::relative(e.path(), dir).string()] = body;
  }
  return files;
}

Outcome criterion_determinism() {
  auto& run = demo_run();
  const auto first = snapshot(run.dir);
  const double first_secs = run.seconds;
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::run_demo(run.config);
  const double second_secs = seconds_since(t0);
  const auto second = snapshot(run.dir);
  if (first.size() != second.size()) return {false, "artifact sets differ"};
  for (const auto& [name, body] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != body) return {false, "artifact differs: " + name};
  }
  const bool fast = first_secs < 60.0 && second_secs < 60.0;
  return {fast && !first.empty(), std::to_string(first.size()) + " artifacts byte-identical; runs took " +
                                      fmt(first_secs, 2) + " s and " + fmt(second_secs, 2) + " s"};
}

// --------------------------------------------------------------- criterion 10

bool tensors_equal(const nn::ConstParamRefs& a, const nn::ConstParamRefs& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->name != b[i]->name || a[i]->value.rows() != b[i]->value.rows() ||
        a[i]->value.cols() != b[i]->value.cols()) {
      return false;
    }
    if (std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(double) * a[i]->value.size()) != 0) return false;
  }
  return true;
}

Outcome criterion_checkpoints() {
  const auto& run = demo_run();
  const auto store = demo_store(run);
  const auto dir = work_root() / "roundtrip";
  fs::create_directories(dir);
  const auto imps = corpus::load_behaviors(run.config.paths.behaviors, store);

  const auto rk = ranker::load_ranker(run.dir / "ranker");
  ranker::save_ranker(rk, dir / "ranker");
  const auto rk2 = ranker::load_ranker(dir / "ranker");
  bool rank_ok = tensors_equal(rk.params(), rk2.params()) && rk.vocab() == rk2.vocab() && rk.k_neg == rk2.k_neg;
  for (const auto& imp : imps) {
    const auto a = ranker::rank_candidates(rk, imp, store), b = ranker::rank_candidates(rk2, imp, store);
    for (std::size_t i = 0; i < a.size(); ++i) rank_ok = rank_ok && a[i].news_id == b[i].news_id && a[i].score == b[i].score;
  }

  const auto rel = relation::load_relation(run.dir / "relation");
  relation::save_relation(rel, dir / "relation");
  const auto rel2 = relation::load_relation(dir / "relation");
  bool rel_ok = tensors_equal(rel.params(), rel2.params()) && rel.version() == rel2.version();
  for (const auto& a : store.articles()) {
    const Vector x = rel.embed(a), y = rel2.embed(a);
    rel_ok = rel_ok && x.size() == y.size() && std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
  }

  const auto gen = uift::load_generator(run.dir / "generator");
  uift::save_generator(gen, dir / "generator");
  const auto gen2 = uift::load_generator(dir / "generator");
  bool gen_ok = tensors_equal(gen.params(), gen2.params()) && gen.vocab() == gen2.vocab();
  for (const auto& t : uift::read_triples(run.dir / "triples.jsonl")) {
    for (const auto& text : t.texts) {
      gen_ok = gen_ok && uift::seq_logprob_norm(gen, t.condition, text) == uift::seq_logprob_norm(gen2, t.condition, text);
    }
    gen_ok = gen_ok && uift::generate(gen, t.condition, 20) == uift::generate(gen2, t.condition, 20);
  }
  return {rank_ok && rel_ok && gen_ok, std::string("ranker ") + (rank_ok ? "ok" : "MISMATCH") + ", relation " +
                                           (rel_ok ? "ok" : "MISMATCH") + ", generator " + (gen_ok ? "ok" : "MISMATCH")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", criterion_metric_oracle},
      {"gradient suite", criterion_gradients},
      {"dual-level trend", criterion_dual_trend},
      {"threshold monotonicity", criterion_threshold_nesting},
      {"UIFT effectiveness", criterion_uift},
      {"win rate fixture", criterion_win_rate},
      {"stub-pipeline consistency", criterion_stub_consistency},
      {"reference-set invariants", criterion_refset_invariants},
      {"end-to-end determinism", criterion_determinism},
      {"checkpoint round trips", criterion_checkpoints},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  fs::remove_all(work_root());
  return failed == 0 ? 0 : 1;
}
