#pragma once

#include "gnr/corpus.hpp"
#include "gnr/encoder.hpp"
#include "gnr/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace gnr::ranker {

using corpus::CorpusStore;
using corpus::Impression;
using corpus::NewsArticle;

// Which representation an article contributes on one side of the match.
enum class View { kSemantic, kTheme, kDual };

View parse_view(const std::string& name);
std::string to_string(View view);

// Text fed to the semantic encoder: title followed by abstract.
std::string semantic_text(const NewsArticle& article);
// Text fed to the theme encoder: topics joined by spaces; empty when unannotated.
std::string theme_text(const NewsArticle& article);

struct EncodedNews {
  Vector semantic;
  Vector theme;
  nn::DualEmbedding dual;

  const Vector& view(View v) const;
};

// Dual-level click model: shared semantic/theme text encoders, the
// multi-view combiner, and an attention-pooling user encoder over history.
class RankerModel {
 public:
  RankerModel(textenc::Vocabulary vocab, textenc::EncoderConfig config, View news_view, View user_view,
              std::uint64_t seed);

  EncodedNews encode(const NewsArticle& article) const;
  Vector news_vector(const NewsArticle& article) const;
  Vector user_vector(const Impression& imp, const CorpusStore& store) const;
  Vector user_vector(const std::vector<const NewsArticle*>& history) const;

  nn::ParamRefs params();
  nn::ConstParamRefs params() const;

  const textenc::Vocabulary& vocab() const { return vocab_; }
  const textenc::EncoderConfig& config() const { return config_; }
  View news_view() const { return news_view_; }
  View user_view() const { return user_view_; }
  std::uint64_t seed() const { return seed_; }

  textenc::TextEncoder semantic_encoder;
  textenc::TextEncoder theme_encoder;
  nn::MultiViewCombiner combiner;
  textenc::UserEncoder user_encoder;

  // Negatives per positive used by the last training run (0 when untrained).
  std::size_t k_neg = 0;

 private:
  textenc::Vocabulary vocab_;
  textenc::EncoderConfig config_;
  View news_view_;
  View user_view_;
  std::uint64_t seed_;
};

struct TrainConfig {
  std::size_t k_neg = 4;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kSgd, 1e-4};
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
};

struct TrainReport {
  std::vector<double> loss_trace;  // mean loss per epoch
  std::size_t samples = 0;
  std::size_t skipped_impressions = 0;         // no click, no negative or empty history
  std::size_t sampled_with_replacement = 0;    // per epoch draws with fewer than k_neg negatives
};

struct ScoredCandidate {
  std::string news_id;
  double score = 0.0;
};

// One (history, clicked, sampled negatives) training example.
struct RankingSample {
  std::vector<std::string> history;
  std::string positive;
  std::vector<std::string> negatives;
};

double score_pair(const Vector& user, const Vector& news);

// Softmax probability of the positive among {positive} U negatives.
double click_probability(double pos_score, const std::vector<double>& neg_scores);

// Mean of -ln p over `samples`; with `with_grad` the gradient of that mean is
// accumulated into the model's parameters.
double ranking_batch_loss(RankerModel& model, const std::vector<RankingSample>& samples, const CorpusStore& store,
                          bool with_grad);

TrainReport train_ranker(RankerModel& model, const std::vector<Impression>& imps, const CorpusStore& store,
                         const TrainConfig& config);

// Descending by score, ties by ascending news id.
std::vector<ScoredCandidate> rank_candidates(const RankerModel& model, const Impression& imp,
                                             const CorpusStore& store);
void sort_scored(std::vector<ScoredCandidate>& scored);

std::string select_focal(const std::vector<ScoredCandidate>& ranked);
// Evaluation mode: the next clicked candidate stands in for the focal news.
std::string ground_truth_focal(const Impression& imp);

void save_ranker(const RankerModel& model, const std::filesystem::path& prefix);
// Rebuilds a model using `config` for shapes; any tensor disagreeing with it is a ShapeError.
RankerModel load_ranker(const std::filesystem::path& prefix, const textenc::EncoderConfig& config);
RankerModel load_ranker(const std::filesystem::path& prefix);

}  // namespace gnr::ranker
