#pragma once

#include "gnr/fusion.hpp"
#include "gnr/gateway.hpp"
#include "gnr/ranker.hpp"

#include <string>
#include <vector>

namespace gnr::eval {

struct LabeledScore {
  double score = 0.0;
  bool clicked = false;
};

using ImpressionScores = std::vector<LabeledScore>;

struct ImpressionMetrics {
  double auc = 0.0;
  bool auc_defined = false;  // needs a positive and a negative
  double mrr = 0.0;
  double ndcg = 0.0;
};

struct MetricsReport {
  double auc = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
  std::size_t k = 5;
  std::size_t samples = 0;
  std::size_t auc_excluded = 0;
  std::vector<ImpressionMetrics> per_impression;
};

// Ties count 1/2. Throws DataError without both a positive and a negative.
double auc(const ImpressionScores& scores);
// Ranking is by score descending, ties by position in the input; 0 without positives.
double mrr(const ImpressionScores& scores);
double ndcg_at_k(const ImpressionScores& scores, std::size_t k);

// Macro averages: AUC over impressions where it is defined, MRR and NDCG over all.
MetricsReport ranking_metrics(const std::vector<ImpressionScores>& impressions, std::size_t k = 5);

struct WinCounts {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;

  std::size_t total() const { return wins + ties + losses; }
  double percent() const;
};

// Win only when the narrative score strictly exceeds the focal score.
WinCounts win_rate_from_scores(const std::vector<std::pair<double, double>>& narrative_vs_focal);

// Scores each narrative (as an article) and its focal article for the
// impression's user. The recommender must use dual-level news and user views.
WinCounts win_rate(const std::vector<fusion::Narrative>& narratives,
                   const std::vector<const corpus::NewsArticle*>& focal_articles,
                   const ranker::RankerModel& recommender, const std::vector<const corpus::Impression*>& contexts,
                   const corpus::CorpusStore& store);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string name() const = 0;
  // Throws ProviderError or ParseError when no verdict could be obtained.
  virtual bool consistent(const std::vector<const corpus::NewsArticle*>& sources,
                          const fusion::Narrative& narrative) = 0;
};

// Every narrative sentence (title and abstract) has word Jaccard >= 0.5 with a source sentence.
class BuiltinJudge : public Judge {
 public:
  std::string name() const override { return "builtin-extractive"; }
  bool consistent(const std::vector<const corpus::NewsArticle*>& sources, const fusion::Narrative& narrative) override;
};

class LlmJudge : public Judge {
 public:
  explicit LlmJudge(llm::Gateway& gateway) : gateway_(gateway) {}
  std::string name() const override;
  bool consistent(const std::vector<const corpus::NewsArticle*>& sources, const fusion::Narrative& narrative) override;

 private:
  llm::Gateway& gateway_;
};

struct ConsistencyCounts {
  std::size_t consistent = 0;
  std::size_t inconsistent = 0;
  std::size_t judge_failures = 0;

  // Over judged pairs only; 0 when nothing was judged.
  double percent() const;
};

ConsistencyCounts consistency_rate(const std::vector<explorer::ReferenceNewsSet>& sets,
                                   const std::vector<fusion::Narrative>& narratives,
                                   const corpus::CorpusStore& store, Judge& judge);

}  // namespace gnr::eval
