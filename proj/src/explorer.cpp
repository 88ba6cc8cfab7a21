#include "gnr/explorer.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace gnr::explorer {

FocalMode parse_focal_mode(const std::string& name) {
  if (name == "ranked") return FocalMode::kRanked;
  if (name == "ground_truth") return FocalMode::kGroundTruth;
  throw ConfigError("unknown focal mode '" + name + "' (expected ranked or ground_truth)");
}

std::string to_string(FocalMode mode) { return mode == FocalMode::kRanked ? "ranked" : "ground_truth"; }

void ExplorerConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("explorer.alpha must lie in [0, 1]");
  if (t_min < 2) throw ConfigError("explorer.t_min must be at least 2");
  if (t_max < t_min) throw ConfigError("explorer.t_max must be >= explorer.t_min");
}

std::vector<std::string> ReferenceNewsSet::ids() const {
  std::vector<std::string> out{focal};
  for (const auto& r : related) out.push_back(r.id);
  return out;
}

std::vector<ranker::ScoredCandidate> personalized_filter(const Vector& user, const std::vector<std::string>& related,
                                                         const ranker::RankerModel& model, const CorpusStore& store,
                                                         std::size_t keep) {
  std::vector<ranker::ScoredCandidate> scored;
  scored.reserve(related.size());
  for (const auto& id : related) scored.push_back({id, ranker::score_pair(user, model.news_vector(store.at(id)))});
  ranker::sort_scored(scored);
  if (scored.size() > keep) scored.resize(keep);
  return scored;
}

BuildOutcome build_reference_set(const Impression& imp, const ranker::RankerModel& ranker,
                                 const relation::RelationModel& relmodel, const CorpusStore& store,
                                 const ExplorerConfig& config, relation::EmbeddingCache* cache) {
  config.validate();
  for (const auto& id : imp.history) store.at(id);
  for (const auto& c : imp.candidates) store.at(c.news_id);

  BuildOutcome out;
  out.set.impression_id = imp.impression_id;
  out.set.t_max = config.t_max;
  out.set.focal = config.focal_mode == FocalMode::kGroundTruth
                      ? ranker::ground_truth_focal(imp)
                      : ranker::select_focal(ranker::rank_candidates(ranker, imp, store));

  const auto related = relation::explore_related(out.set.focal, store, relmodel, config.alpha, cache);
  const std::set<std::string> history(imp.history.begin(), imp.history.end());
  std::vector<std::string> ids;
  std::unordered_map<std::string, double> rel_score;
  for (const auto& r : related) {
    if (config.exclude_history && history.count(r.id) > 0) continue;
    ids.push_back(r.id);
    rel_score[r.id] = r.score;
  }
  const Vector user = ranker.user_vector(imp, store);
  for (const auto& s : personalized_filter(user, ids, ranker, store, config.t_max - 1)) {
    out.set.related.push_back({s.news_id, rel_score.at(s.news_id), s.score});
  }
  out.insufficient = out.set.size() < config.t_min;
  check_invariants(out.set, config.alpha);
  return out;
}

void check_invariants(const ReferenceNewsSet& set, double alpha) {
  std::set<std::string> seen{set.focal};
  for (const auto& r : set.related) {
    if (r.id == set.focal) throw Error("reference set " + set.impression_id + ": focal appears among related");
    if (!seen.insert(r.id).second) throw Error("reference set " + set.impression_id + ": duplicate " + r.id);
    if (r.relation_score < alpha) {
      throw Error("reference set " + set.impression_id + ": " + r.id + " scores below the relation threshold");
    }
  }
  if (set.size() > set.t_max) throw Error("reference set " + set.impression_id + " exceeds t_max");
}

void write_reference_sets(const std::vector<BuildOutcome>& outcomes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& o : outcomes) {
    nlohmann::json related = nlohmann::json::array();
    for (const auto& r : o.set.related) {
      related.push_back({{"id", r.id}, {"relation_score", r.relation_score}, {"personal_score", r.personal_score}});
    }
    nlohmann::json rec = {{"impression_id", o.set.impression_id},
                          {"focal", o.set.focal},
                          {"related", related},
                          {"t_max", o.set.t_max},
                          {"excluded", o.insufficient}};
    out << rec.dump() << '\n';
  }
}

std::vector<BuildOutcome> read_reference_sets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<BuildOutcome> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      BuildOutcome o;
      o.set.impression_id = j.at("impression_id").get<std::string>();
      o.set.focal = j.at("focal").get<std::string>();
      o.set.t_max = j.at("t_max").get<std::size_t>();
      o.insufficient = j.at("excluded").get<bool>();
      for (const auto& r : j.at("related")) {
        o.set.related.push_back({r.at("id").get<std::string>(), r.at("relation_score").get<double>(),
                                 r.at("personal_score").get<double>()});
      }
      out.push_back(std::move(o));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gnr::explorer
