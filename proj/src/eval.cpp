#include "gnr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gnr::eval {

double auc(const ImpressionScores& scores) {
  // Mann-Whitney statistic with midranks for tied scores.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a].score < scores[b].score; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]].score == scores[order[i]].score) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (scores[order[t]].clicked) {
        pos_rank_sum += midrank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("AUC needs at least one positive and one negative");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

namespace {

std::vector<std::size_t> ranked_order(const ImpressionScores& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });
  return order;
}

}  // namespace

double mrr(const ImpressionScores& scores) {
  const auto order = ranked_order(scores);
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (scores[order[r]].clicked) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

double ndcg_at_k(const ImpressionScores& scores, std::size_t k) {
  const auto order = ranked_order(scores);
  double dcg = 0.0;
  std::size_t positives = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!scores[order[r]].clicked) continue;
    ++positives;
    if (r < k) dcg += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(positives, k); ++r) ideal += 1.0 / std::log2(static_cast<double>(r + 2));
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

MetricsReport ranking_metrics(const std::vector<ImpressionScores>& impressions, std::size_t k) {
  if (impressions.empty()) throw DataError("ranking_metrics: no impressions");
  if (k == 0) throw ConfigError("ranking_metrics: k must be positive");
  MetricsReport rep;
  rep.k = k;
  rep.samples = impressions.size();
  double auc_sum = 0.0, mrr_sum = 0.0, ndcg_sum = 0.0;
  std::size_t auc_n = 0;
  for (const auto& imp : impressions) {
    if (imp.empty()) throw DataError("ranking_metrics: impression without candidates");
    ImpressionMetrics m;
    const auto pos = std::count_if(imp.begin(), imp.end(), [](const LabeledScore& s) { return s.clicked; });
    if (pos > 0 && static_cast<std::size_t>(pos) < imp.size()) {
      m.auc = auc(imp);
      m.auc_defined = true;
      auc_sum += m.auc;
      ++auc_n;
    } else {
      ++rep.auc_excluded;
    }
    m.mrr = mrr(imp);
    m.ndcg = ndcg_at_k(imp, k);
    mrr_sum += m.mrr;
    ndcg_sum += m.ndcg;
    rep.per_impression.push_back(m);
  }
  const double n = static_cast<double>(impressions.size());
  rep.auc = auc_n > 0 ? auc_sum / static_cast<double>(auc_n) : 0.0;
  rep.mrr = mrr_sum / n;
  rep.ndcg = ndcg_sum / n;
  return rep;
}

double WinCounts::percent() const {
  return total() == 0 ? 0.0 : 100.0 * static_cast<double>(wins) / static_cast<double>(total());
}

WinCounts win_rate_from_scores(const std::vector<std::pair<double, double>>& narrative_vs_focal) {
  WinCounts c;
  for (const auto& [n, f] : narrative_vs_focal) {
    if (n > f) {
      ++c.wins;
    } else if (n == f) {
      ++c.ties;
    } else {
      ++c.losses;
    }
  }
  return c;
}

WinCounts win_rate(const std::vector<fusion::Narrative>& narratives,
                   const std::vector<const corpus::NewsArticle*>& focal_articles,
                   const ranker::RankerModel& recommender, const std::vector<const corpus::Impression*>& contexts,
                   const corpus::CorpusStore& store) {
  if (narratives.size() != focal_articles.size() || narratives.size() != contexts.size()) {
    throw DataError("win_rate: narratives, focal articles and contexts differ in length");
  }
  if (recommender.news_view() != ranker::View::kDual || recommender.user_view() != ranker::View::kDual) {
    throw ConfigError("win_rate needs a recommender with dual-level news and user views");
  }
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < narratives.size(); ++i) {
    const Vector user = recommender.user_vector(*contexts[i], store);
    const auto pseudo = fusion::as_article(narratives[i], "narrative-" + narratives[i].impression_id);
    pairs.emplace_back(ranker::score_pair(user, recommender.news_vector(pseudo)),
                       ranker::score_pair(user, recommender.news_vector(*focal_articles[i])));
  }
  return win_rate_from_scores(pairs);
}

bool BuiltinJudge::consistent(const std::vector<const corpus::NewsArticle*>& sources,
                              const fusion::Narrative& narrative) {
  std::vector<std::string> texts;
  for (const auto* a : sources) {
    texts.push_back(a->title);
    texts.push_back(a->abstract);
  }
  return llm::extractive_consistent(texts, narrative.title) && llm::extractive_consistent(texts, narrative.abstract);
}

std::string LlmJudge::name() const { return std::string("llm-") + llm::kJudgeVersion; }

bool LlmJudge::consistent(const std::vector<const corpus::NewsArticle*>& sources, const fusion::Narrative& narrative) {
  const auto ex = gateway_.complete(llm::render_judge_prompt(sources, narrative.title, narrative.abstract));
  return llm::parse_judge_response(ex.response);
}

double ConsistencyCounts::percent() const {
  const std::size_t judged = consistent + inconsistent;
  return judged == 0 ? 0.0 : 100.0 * static_cast<double>(consistent) / static_cast<double>(judged);
}

ConsistencyCounts consistency_rate(const std::vector<explorer::ReferenceNewsSet>& sets,
                                   const std::vector<fusion::Narrative>& narratives,
                                   const corpus::CorpusStore& store, Judge& judge) {
  if (sets.size() != narratives.size()) throw DataError("consistency_rate: sets and narratives differ in length");
  ConsistencyCounts c;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::vector<const corpus::NewsArticle*> sources;
    for (const auto& id : sets[i].ids()) sources.push_back(&store.at(id));
    try {
      if (judge.consistent(sources, narratives[i])) {
        ++c.consistent;
      } else {
        ++c.inconsistent;
      }
    } catch (const ProviderError&) {
      ++c.judge_failures;
    } catch (const ParseError&) {
      ++c.judge_failures;
    }
  }
  return c;
}

}  // namespace gnr::eval
