#include "gnr/relation.hpp"

#include "gnr/checkpoint.hpp"
#include "gnr/ranker.hpp"
#include "gnr/text_util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <set>
#include <unordered_map>

namespace gnr::relation {

void RelationConfig::validate() const {
  if (!(margin > 0.0)) throw ConfigError("relation.margin must be > 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("relation.threshold must lie in [0, 1]");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("relation.learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("relation.batch_size must be at least 1");
}

RelationModel::RelationModel(textenc::Vocabulary vocab, textenc::EncoderConfig config, std::uint64_t seed)
    : encoder("relation", vocab.size(), config.dim, config.heads),
      vocab_(std::move(vocab)),
      config_(config),
      seed_(seed) {
  Rng rng(seed);
  nn::init_uniform(params(), rng, config_.init_scale);
}

Vector RelationModel::embed(const NewsArticle& article, textenc::TextEncoder::Cache* cache) const {
  return encoder.encode(textenc::tokenize(ranker::semantic_text(article), vocab_, config_.max_len), cache);
}

std::string RelationModel::version() const {
  std::string buf = text::join(vocab_.tokens(), "\n");
  for (const auto* p : params()) {
    buf += p->name;
    const auto bytes = static_cast<std::size_t>(p->value.size()) * sizeof(double);
    buf.append(reinterpret_cast<const char*>(p->value.data()), bytes);
  }
  return text::sha256_hex(buf).substr(0, 16);
}

double score_embeddings(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("relation score: embedding dimensions differ");
  const double aa = a.squaredNorm();
  const double bb = b.squaredNorm();
  if (aa == 0.0 || bb == 0.0) {
    spdlog::warn("relation score on a zero embedding; returning 0.5");
    return 0.5;
  }
  const double cos = std::clamp(a.dot(b) / std::sqrt(aa * bb), -1.0, 1.0);
  return (cos + 1.0) / 2.0;
}

double relation_score(const NewsArticle& a, const NewsArticle& b, const RelationModel& model) {
  return score_embeddings(model.embed(a), model.embed(b));
}

double triplet_loss(double d_ap, double d_an, double margin) { return std::max(d_ap - d_an + margin, 0.0); }

namespace {

struct Branch {
  textenc::TextEncoder::Cache cache;
  Vector raw;
  Vector unit;
  double norm = 0.0;
  Vector d_unit;
};

}  // namespace

double triplet_batch_loss(RelationModel& model, const std::vector<Triplet>& triplets, const CorpusStore& store,
                          double margin, bool with_grad) {
  if (triplets.empty()) return 0.0;
  std::vector<Branch> branches;
  std::unordered_map<std::string, std::size_t> slot;
  auto get = [&](const std::string& id) -> std::size_t {
    auto it = slot.find(id);
    if (it != slot.end()) return it->second;
    const std::size_t s = branches.size();
    slot.emplace(id, s);
    branches.emplace_back();
    Branch& b = branches.back();
    b.raw = model.embed(store.at(id), with_grad ? &b.cache : nullptr);
    b.norm = b.raw.norm();
    b.unit = b.norm > 0.0 ? Vector(b.raw / b.norm) : Vector(Vector::Zero(b.raw.size()));
    b.d_unit = Vector::Zero(b.raw.size());
    return s;
  };

  const double inv = 1.0 / static_cast<double>(triplets.size());
  double total = 0.0;
  for (const auto& t : triplets) {
    const std::size_t a = get(t.anchor), p = get(t.positive), n = get(t.negative);
    const Vector dap = branches[a].unit - branches[p].unit;
    const Vector dan = branches[a].unit - branches[n].unit;
    const double d_ap = dap.norm(), d_an = dan.norm();
    const double loss = triplet_loss(d_ap, d_an, margin);
    total += loss;
    if (!with_grad || loss <= 0.0) continue;
    // Subgradient 0 where a distance vanishes.
    if (d_ap > 0.0) {
      const Vector g = dap * (inv / d_ap);
      branches[a].d_unit += g;
      branches[p].d_unit -= g;
    }
    if (d_an > 0.0) {
      const Vector g = dan * (inv / d_an);
      branches[a].d_unit -= g;
      branches[n].d_unit += g;
    }
  }
  if (with_grad) {
    for (auto& b : branches) {
      if (b.norm <= 0.0) continue;
      const Vector d_raw = (b.d_unit - b.unit * b.unit.dot(b.d_unit)) / b.norm;
      model.encoder.backward(b.cache, d_raw);
    }
  }
  return total * inv;
}

std::vector<Triplet> sample_triplets(const corpus::RelationPairSet& pairs, const CorpusStore& store, Rng& rng) {
  std::unordered_map<std::string, std::set<std::string>> linked;
  for (const auto& p : pairs.pairs) {
    linked[p.anchor].insert(p.related);
    linked[p.related].insert(p.anchor);
  }
  const auto ids = store.ids();
  std::unordered_map<std::string, std::vector<const std::string*>> pools;
  std::vector<Triplet> out;
  out.reserve(pairs.pairs.size());
  for (const auto& p : pairs.pairs) {
    auto it = pools.find(p.anchor);
    if (it == pools.end()) {
      std::vector<const std::string*> pool;
      const auto& excluded = linked[p.anchor];
      for (const auto& id : ids) {
        if (id != p.anchor && excluded.count(id) == 0) pool.push_back(&id);
      }
      it = pools.emplace(p.anchor, std::move(pool)).first;
    }
    if (it->second.empty()) throw DataError("no unrelated article available as a negative for " + p.anchor);
    out.push_back({p.anchor, p.related, *it->second[rng.below(it->second.size())]});
  }
  return out;
}

RelationTrainReport train_relation(RelationModel& model, const corpus::RelationPairSet& pairs,
                                   const CorpusStore& store, const RelationConfig& config) {
  config.validate();
  if (pairs.pairs.empty()) throw DataError("train_relation: no relation pairs");
  if (store.size() < 3) throw DataError("train_relation: corpus needs at least 3 articles");
  Rng rng(config.seed);
  auto params = model.params();
  nn::Optimizer opt(config.optimizer, params);
  RelationTrainReport report;
  report.triplets_per_epoch = pairs.pairs.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto triplets = sample_triplets(pairs, store, rng);
    rng.shuffle(triplets);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < triplets.size(); start += config.batch_size) {
      const std::size_t end = std::min(triplets.size(), start + config.batch_size);
      std::vector<Triplet> batch(triplets.begin() + static_cast<std::ptrdiff_t>(start),
                                 triplets.begin() + static_cast<std::ptrdiff_t>(end));
      nn::zero_grad(params);
      epoch_loss += triplet_batch_loss(model, batch, store, config.margin, true) * static_cast<double>(batch.size());
      opt.step(params);
    }
    report.loss_trace.push_back(epoch_loss / static_cast<double>(triplets.size()));
  }
  if (!nn::all_finite(params)) throw Error("train_relation: parameters diverged to non-finite values");
  return report;
}

Vector EmbeddingCache::get(const NewsArticle& article, const RelationModel& model) {
  {
    std::shared_lock lock(mutex_);
    auto it = vectors_.find(article.id);
    if (it != vectors_.end()) return it->second;
  }
  Vector v = model.embed(article);
  std::unique_lock lock(mutex_);
  return vectors_.emplace(article.id, std::move(v)).first->second;
}

void EmbeddingCache::fill(const CorpusStore& store, const RelationModel& model) {
  for (const auto& a : store.articles()) get(a, model);
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return vectors_.size();
}

void EmbeddingCache::save(const std::filesystem::path& prefix) const {
  std::shared_lock lock(mutex_);
  std::vector<nn::Param> rows;
  rows.reserve(vectors_.size());
  for (const auto& [id, v] : vectors_) {
    nn::Param p;
    p.name = id;
    p.value = v.transpose();
    rows.push_back(std::move(p));
  }
  nn::ConstParamRefs refs;
  for (const auto& p : rows) refs.push_back(&p);
  textenc::save_checkpoint(prefix, "embedding-cache", {{"model_version", version_}}, refs);
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& prefix, const std::string& expected_version) {
  const auto ck = textenc::read_checkpoint(prefix, "embedding-cache");
  const auto version = ck.header.value("model_version", std::string());
  if (version != expected_version) {
    throw DataError("embedding cache " + prefix.string() + " was built for model " + version + ", expected " +
                    expected_version);
  }
  EmbeddingCache cache(version);
  for (const auto& t : ck.tensors) cache.vectors_[t.name] = t.value.row(0).transpose();
  return cache;
}

std::vector<RelatedItem> explore_related(const std::string& focal, const CorpusStore& store,
                                         const RelationModel& model, double alpha, EmbeddingCache* cache) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("relation threshold must lie in [0, 1]");
  if (cache != nullptr && cache->version() != model.version()) {
    throw DataError("embedding cache does not belong to the current relation model");
  }
  auto embed = [&](const NewsArticle& a) { return cache ? cache->get(a, model) : model.embed(a); };
  const Vector ef = embed(store.at(focal));
  std::vector<RelatedItem> out;
  for (const auto& a : store.articles()) {
    if (a.id == focal) continue;
    const double s = score_embeddings(ef, embed(a));
    if (s >= alpha) out.push_back({a.id, s});
  }
  std::sort(out.begin(), out.end(), [](const RelatedItem& x, const RelatedItem& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });
  return out;
}

void save_relation(const RelationModel& model, const std::filesystem::path& prefix) {
  const auto& c = model.config();
  nlohmann::json header = {{"dim", c.dim},
                           {"heads", c.heads},
                           {"max_len", c.max_len},
                           {"theme_max_len", c.theme_max_len},
                           {"min_freq", c.min_freq},
                           {"init_scale", c.init_scale},
                           {"seed", model.seed()},
                           {"vocab", model.vocab().tokens()}};
  textenc::save_checkpoint(prefix, "relation", header, model.params());
}

RelationModel load_relation(const std::filesystem::path& prefix) {
  const auto ck = textenc::read_checkpoint(prefix, "relation");
  try {
    const auto& h = ck.header;
    textenc::EncoderConfig c;
    c.dim = h.at("dim").get<int>();
    c.heads = h.at("heads").get<int>();
    c.max_len = h.at("max_len").get<std::size_t>();
    c.theme_max_len = h.at("theme_max_len").get<std::size_t>();
    c.min_freq = h.at("min_freq").get<std::size_t>();
    c.init_scale = h.at("init_scale").get<double>();
    RelationModel model(textenc::Vocabulary::from_tokens(h.at("vocab").get<std::vector<std::string>>()), c,
                        h.at("seed").get<std::uint64_t>());
    textenc::assign_tensors(ck, model.params());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed relation header in " + prefix.string() + ": " + e.what());
  }
}

}  // namespace gnr::relation
