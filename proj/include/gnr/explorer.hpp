#pragma once

#include "gnr/ranker.hpp"
#include "gnr/relation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gnr::explorer {

using corpus::CorpusStore;
using corpus::Impression;

enum class FocalMode { kRanked, kGroundTruth };

FocalMode parse_focal_mode(const std::string& name);
std::string to_string(FocalMode mode);

struct ExplorerConfig {
  double alpha = 0.8;
  std::size_t t_min = 3;
  std::size_t t_max = 4;
  FocalMode focal_mode = FocalMode::kRanked;
  bool exclude_history = false;  // drop related items the user already read

  void validate() const;
};

struct RelatedEntry {
  std::string id;
  double relation_score = 0.0;
  double personal_score = 0.0;

  bool operator==(const RelatedEntry&) const = default;
};

struct ReferenceNewsSet {
  std::string impression_id;
  std::string focal;
  std::vector<RelatedEntry> related;
  std::size_t t_max = 0;

  // Focal first, then related in order.
  std::vector<std::string> ids() const;
  std::size_t size() const { return 1 + related.size(); }

  bool operator==(const ReferenceNewsSet&) const = default;
};

struct BuildOutcome {
  ReferenceNewsSet set;       // populated even when insufficient
  bool insufficient = false;  // 1 + |related| < t_min; the sample is excluded

  bool operator==(const BuildOutcome&) const = default;
};

// Top `keep` of `related` by user . news score, ties by ascending id.
std::vector<ranker::ScoredCandidate> personalized_filter(const Vector& user, const std::vector<std::string>& related,
                                                         const ranker::RankerModel& model, const CorpusStore& store,
                                                         std::size_t keep);

BuildOutcome build_reference_set(const Impression& imp, const ranker::RankerModel& ranker,
                                 const relation::RelationModel& relmodel, const CorpusStore& store,
                                 const ExplorerConfig& config, relation::EmbeddingCache* cache = nullptr);

// Throws Error when focal is repeated, the size exceeds t_max or a related
// item scores below alpha.
void check_invariants(const ReferenceNewsSet& set, double alpha);

void write_reference_sets(const std::vector<BuildOutcome>& outcomes, const std::filesystem::path& path);
std::vector<BuildOutcome> read_reference_sets(const std::filesystem::path& path);

}  // namespace gnr::explorer
