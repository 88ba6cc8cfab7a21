#include "gnr/grad_check.hpp"
#include "gnr/ranker.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace gnr;
using gnr::testing::TempDir;

namespace {

textenc::EncoderConfig small_config() {
  textenc::EncoderConfig c;
  c.dim = 8;
  c.heads = 2;
  c.max_len = 12;
  c.theme_max_len = 4;
  c.min_freq = 1;
  c.init_scale = 0.3;
  return c;
}

textenc::Vocabulary vocab_of(const corpus::CorpusStore& store) {
  std::vector<std::string> texts;
  for (const auto& a : store.articles()) {
    texts.push_back(ranker::semantic_text(a));
    texts.push_back(ranker::theme_text(a));
  }
  return textenc::Vocabulary::build(texts, 1);
}

// Clicked candidates share a user-specific token with the history; negatives never do.
struct Separable {
  corpus::CorpusStore store;
  std::vector<corpus::Impression> imps;
};

Separable separable(std::size_t users) {
  Separable s;
  std::size_t n = 0;
  auto add = [&](const std::string& title, const std::string& theme) {
    const std::string id = "A" + std::to_string(n++);
    s.store.add({id, "politics", title, "", std::vector<std::string>{theme}});
    return id;
  };
  for (std::size_t u = 0; u < users; ++u) {
    const std::string key = "key" + std::to_string(u);
    corpus::Impression imp;
    imp.impression_id = "I" + std::to_string(u);
    imp.user_id = "U" + std::to_string(u);
    for (int h = 0; h < 3; ++h) imp.history.push_back(add(key + " story", key));
    imp.candidates.push_back({add(key + " update", key), true});
    for (int k = 0; k < 4; ++k) {
      const std::string other = "neg" + std::to_string(u) + "x" + std::to_string(k);
      imp.candidates.push_back({add(other + " item", other), false});
    }
    s.imps.push_back(std::move(imp));
  }
  return s;
}

template <class A, class B>
bool params_equal(const A& a, const B& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.size() != b[i]->value.size()) return false;
    if (std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(double) * a[i]->value.size()) != 0) return false;
  }
  return true;
}

std::vector<Matrix> snapshot(const ranker::RankerModel& m) {
  std::vector<Matrix> out;
  for (const auto* p : m.params()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST(Score, DotProduct) {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  EXPECT_DOUBLE_EQ(ranker::score_pair(a, b), 0.0);
  a << 1, 2;
  b << 3, 4;
  EXPECT_DOUBLE_EQ(ranker::score_pair(a, b), 11.0);
  EXPECT_DOUBLE_EQ(ranker::score_pair(2.5 * a, b), 2.5 * 11.0);
}

TEST(ClickProbability, Examples) {
  EXPECT_NEAR(ranker::click_probability(1.0, {0.0, 0.0}), std::exp(1.0) / (std::exp(1.0) + 2.0), 1e-15);
  EXPECT_NEAR(ranker::click_probability(1.0, {0.0, 0.0}), 0.576117, 1e-6);
  EXPECT_DOUBLE_EQ(ranker::click_probability(-7.0, {}), 1.0);
  EXPECT_DOUBLE_EQ(ranker::click_probability(0.0, {0.0, 0.0, 0.0}), 0.25);
  EXPECT_NEAR(ranker::click_probability(800.0, {0.0}), 1.0, 1e-15);
  EXPECT_GT(ranker::click_probability(-800.0, {0.0}), 0.0 - 1e-300);
}

TEST(Views, ParseAndText) {
  EXPECT_EQ(ranker::parse_view("sem"), ranker::View::kSemantic);
  EXPECT_EQ(ranker::parse_view("dual"), ranker::View::kDual);
  EXPECT_THROW(ranker::parse_view("both"), ConfigError);
  corpus::NewsArticle a{"N1", "politics", "Title", "Abstract.", std::vector<std::string>{"a b", "c"}};
  EXPECT_EQ(ranker::semantic_text(a), "Title Abstract.");
  EXPECT_EQ(ranker::theme_text(a), "a b c");
  a.theme_topics.reset();
  EXPECT_EQ(ranker::theme_text(a), "");
}

TEST(RankingLoss, EqualsNegLogClickProbability) {
  const auto s = separable(2);
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 1);
  const auto& imp = s.imps[0];
  ranker::RankingSample sample{imp.history, imp.candidates[0].news_id,
                               {imp.candidates[1].news_id, imp.candidates[2].news_id}};
  const Vector u = model.user_vector(imp, s.store);
  const double pos = ranker::score_pair(u, model.news_vector(s.store.at(sample.positive)));
  std::vector<double> negs;
  for (const auto& id : sample.negatives) negs.push_back(ranker::score_pair(u, model.news_vector(s.store.at(id))));
  const double expected = -std::log(ranker::click_probability(pos, negs));
  EXPECT_NEAR(ranker::ranking_batch_loss(model, {sample}, s.store, false), expected, 1e-12);
}

TEST(RankingLoss, GradientOnePositiveTwoNegatives) {
  const auto s = separable(2);
  for (auto [nv, uv] : {std::pair{ranker::View::kDual, ranker::View::kDual},
                        std::pair{ranker::View::kSemantic, ranker::View::kTheme}}) {
    ranker::RankerModel model(vocab_of(s.store), small_config(), nv, uv, 2);
    const auto& imp = s.imps[1];
    std::vector<ranker::RankingSample> batch = {
        {imp.history, imp.candidates[0].news_id, {imp.candidates[1].news_id, imp.candidates[2].news_id}}};
    const auto rep = textenc::grad_check(
        "ranking", [&](bool g) { return ranker::ranking_batch_loss(model, batch, s.store, g); }, model.params());
    EXPECT_TRUE(rep.passed) << ranker::to_string(nv) << "/" << ranker::to_string(uv) << " " << rep.max_rel_error;
  }
}

TEST(TrainRanker, SeparableFixtureLearnsClicks) {
  const auto s = separable(20);
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 3);
  ranker::TrainConfig cfg;
  cfg.optimizer = {nn::OptimizerKind::kAdam, 1e-2};
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.k_neg = 4;
  const auto rep = ranker::train_ranker(model, s.imps, s.store, cfg);
  ASSERT_EQ(rep.loss_trace.size(), 50u);
  EXPECT_LT(rep.loss_trace.back(), rep.loss_trace.front());
  double mean_p = 0;
  for (const auto& imp : s.imps) {
    const Vector u = model.user_vector(imp, s.store);
    double pos = 0;
    std::vector<double> negs;
    for (const auto& c : imp.candidates) {
      const double sc = ranker::score_pair(u, model.news_vector(s.store.at(c.news_id)));
      if (c.clicked) {
        pos = sc;
      } else {
        negs.push_back(sc);
      }
    }
    mean_p += ranker::click_probability(pos, negs);
  }
  mean_p /= static_cast<double>(s.imps.size());
  EXPECT_GT(mean_p, 0.9);
  EXPECT_EQ(model.k_neg, 4u);
}

TEST(TrainRanker, NullUpdatesKeepParameters) {
  const auto s = separable(3);
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 4);
  const auto before = snapshot(model);
  ranker::TrainConfig cfg;
  cfg.optimizer.learning_rate = 0.0;
  cfg.epochs = 2;
  ranker::train_ranker(model, s.imps, s.store, cfg);
  const auto after = snapshot(model);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(std::memcmp(before[i].data(), after[i].data(), sizeof(double) * before[i].size()), 0);
  }
  cfg.optimizer.learning_rate = 1e-2;
  cfg.epochs = 0;
  const auto rep = ranker::train_ranker(model, s.imps, s.store, cfg);
  EXPECT_TRUE(rep.loss_trace.empty());
  const auto again = snapshot(model);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(before[i] == again[i]);
}

TEST(TrainRanker, CountsSkipsAndReplacementDraws) {
  auto s = separable(2);
  s.imps[0].candidates.resize(2);  // one negative left, fewer than k_neg
  corpus::Impression no_click = s.imps[1];
  for (auto& c : no_click.candidates) c.clicked = false;
  corpus::Impression no_history = s.imps[1];
  no_history.history.clear();
  std::vector<corpus::Impression> imps = {s.imps[0], no_click, no_history};
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 5);
  ranker::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.k_neg = 4;
  const auto rep = ranker::train_ranker(model, imps, s.store, cfg);
  EXPECT_EQ(rep.skipped_impressions, 2u);
  EXPECT_EQ(rep.samples, 1u);
  EXPECT_EQ(rep.sampled_with_replacement, 3u);
  EXPECT_THROW(ranker::train_ranker(model, {no_click}, s.store, cfg), DataError);
  cfg.k_neg = 0;
  EXPECT_THROW(ranker::train_ranker(model, imps, s.store, cfg), ConfigError);
}

TEST(TrainRanker, DeterministicForFixedSeed) {
  const auto s = separable(6);
  ranker::TrainConfig cfg;
  cfg.optimizer = {nn::OptimizerKind::kAdam, 1e-2};
  cfg.epochs = 3;
  ranker::RankerModel a(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 6);
  ranker::RankerModel b(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 6);
  const auto ra = ranker::train_ranker(a, s.imps, s.store, cfg);
  const auto rb = ranker::train_ranker(b, s.imps, s.store, cfg);
  EXPECT_EQ(ra.loss_trace, rb.loss_trace);
  EXPECT_TRUE(params_equal(a.params(), b.params()));
}

TEST(RankCandidates, SortAndTieBreak) {
  std::vector<ranker::ScoredCandidate> v = {{"N1", 0.2}, {"N2", 0.9}};
  ranker::sort_scored(v);
  EXPECT_EQ(v[0].news_id, "N2");
  v = {{"N2", 0.5}, {"N1", 0.5}};
  ranker::sort_scored(v);
  EXPECT_EQ(v[0].news_id, "N1");
  EXPECT_EQ(ranker::select_focal({{"N2", 0.9}, {"N1", 0.2}}), "N2");
  EXPECT_EQ(ranker::select_focal({{"N7", -1.0}}), "N7");
  EXPECT_THROW(ranker::select_focal({}), DataError);
}

TEST(RankCandidates, OrderInvariantUnderUserScaling) {
  const auto s = separable(3);
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 7);
  const auto& imp = s.imps[2];
  const Vector u = model.user_vector(imp, s.store);
  std::vector<ranker::ScoredCandidate> a, b;
  for (const auto& c : imp.candidates) {
    const Vector n = model.news_vector(s.store.at(c.news_id));
    a.push_back({c.news_id, ranker::score_pair(u, n)});
    b.push_back({c.news_id, ranker::score_pair(3.0 * u, n)});
  }
  ranker::sort_scored(a);
  ranker::sort_scored(b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].news_id, b[i].news_id);
  const auto ranked = ranker::rank_candidates(model, imp, s.store);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(ranked[i].news_id, a[i].news_id);
}

TEST(RankCandidates, Errors) {
  const auto s = separable(1);
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kDual, 8);
  auto imp = s.imps[0];
  imp.history.clear();
  EXPECT_THROW(ranker::rank_candidates(model, imp, s.store), DataError);
  imp = s.imps[0];
  imp.candidates.clear();
  EXPECT_THROW(ranker::rank_candidates(model, imp, s.store), DataError);
}

TEST(GroundTruthFocal, FirstClicked) {
  corpus::Impression imp;
  imp.candidates = {{"N1", false}, {"N5", true}, {"N6", true}};
  EXPECT_EQ(ranker::ground_truth_focal(imp), "N5");
  imp.candidates = {{"N1", false}};
  EXPECT_THROW(ranker::ground_truth_focal(imp), DataError);
}

TEST(RankerCheckpoint, RoundTripAndShapeMismatch) {
  TempDir dir;
  const auto s = separable(3);
  ranker::RankerModel model(vocab_of(s.store), small_config(), ranker::View::kDual, ranker::View::kSemantic, 9);
  ranker::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.optimizer = {nn::OptimizerKind::kAdam, 1e-2};
  ranker::train_ranker(model, s.imps, s.store, cfg);
  ranker::save_ranker(model, dir / "r");
  const auto loaded = ranker::load_ranker(dir / "r");
  EXPECT_TRUE(params_equal(model.params(), loaded.params()));
  EXPECT_EQ(loaded.user_view(), ranker::View::kSemantic);
  EXPECT_EQ(loaded.k_neg, model.k_neg);
  for (const auto& imp : s.imps) {
    const auto a = ranker::rank_candidates(model, imp, s.store), b = ranker::rank_candidates(loaded, imp, s.store);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].news_id, b[i].news_id);
      EXPECT_EQ(a[i].score, b[i].score);
    }
  }
  auto wrong = small_config();
  wrong.dim = 12;
  EXPECT_THROW(ranker::load_ranker(dir / "r", wrong), ShapeError);
}
