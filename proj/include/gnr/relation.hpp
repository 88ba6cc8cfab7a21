#pragma once

#include "gnr/corpus.hpp"
#include "gnr/encoder.hpp"
#include "gnr/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

namespace gnr::relation {

using corpus::CorpusStore;
using corpus::NewsArticle;

struct RelationConfig {
  double margin = 0.5;
  double threshold = 0.8;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 1e-3};
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;

  void validate() const;
};

// Siamese classifier: both branches share one text encoder over title + abstract.
class RelationModel {
 public:
  RelationModel(textenc::Vocabulary vocab, textenc::EncoderConfig config, std::uint64_t seed);

  Vector embed(const NewsArticle& article, textenc::TextEncoder::Cache* cache = nullptr) const;

  nn::ParamRefs params() { return encoder.params(); }
  nn::ConstParamRefs params() const { return nn::as_const(const_cast<RelationModel*>(this)->encoder.params()); }

  const textenc::Vocabulary& vocab() const { return vocab_; }
  const textenc::EncoderConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  // Digest of the vocabulary and every weight; keys embedding caches.
  std::string version() const;

  textenc::TextEncoder encoder;

 private:
  textenc::Vocabulary vocab_;
  textenc::EncoderConfig config_;
  std::uint64_t seed_;
};

// (cos(a, b) + 1) / 2 clamped to [0, 1]; 0.5 when either vector is zero.
double score_embeddings(const Vector& a, const Vector& b);
double relation_score(const NewsArticle& a, const NewsArticle& b, const RelationModel& model);

// max(d_ap - d_an + margin, 0)
double triplet_loss(double d_ap, double d_an, double margin);

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;
};

// Mean triplet hinge over unit-normalized embeddings. With `with_grad` the
// gradient of the mean is accumulated into the model.
double triplet_batch_loss(RelationModel& model, const std::vector<Triplet>& triplets, const CorpusStore& store,
                          double margin, bool with_grad);

// One triplet per pair with a freshly sampled negative: any article that is
// neither the anchor nor paired with it in either direction.
std::vector<Triplet> sample_triplets(const corpus::RelationPairSet& pairs, const CorpusStore& store, Rng& rng);

struct RelationTrainReport {
  std::vector<double> loss_trace;  // mean per-triplet loss per epoch
  std::size_t triplets_per_epoch = 0;
};

RelationTrainReport train_relation(RelationModel& model, const corpus::RelationPairSet& pairs,
                                   const CorpusStore& store, const RelationConfig& config);

// Embeddings keyed by news id, valid for one model version.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::string model_version) : version_(std::move(model_version)) {}
  EmbeddingCache(EmbeddingCache&& other) noexcept
      : version_(std::move(other.version_)), vectors_(std::move(other.vectors_)) {}

  const std::string& version() const { return version_; }
  Vector get(const NewsArticle& article, const RelationModel& model);
  void fill(const CorpusStore& store, const RelationModel& model);
  std::size_t size() const;

  void save(const std::filesystem::path& prefix) const;
  // Throws DataError when the stored version differs from `expected_version`.
  static EmbeddingCache load(const std::filesystem::path& prefix, const std::string& expected_version);

 private:
  std::string version_;
  std::map<std::string, Vector> vectors_;
  mutable std::shared_mutex mutex_;
};

struct RelatedItem {
  std::string id;
  double score = 0.0;
};

// Every article other than the focal scoring >= alpha, by score descending then id.
std::vector<RelatedItem> explore_related(const std::string& focal, const CorpusStore& store,
                                         const RelationModel& model, double alpha, EmbeddingCache* cache = nullptr);

void save_relation(const RelationModel& model, const std::filesystem::path& prefix);
RelationModel load_relation(const std::filesystem::path& prefix);

}  // namespace gnr::relation
