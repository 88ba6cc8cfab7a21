#include "gnr/ranker.hpp"

#include "gnr/checkpoint.hpp"
#include "gnr/text_util.hpp"

#include <algorithm>
#include <cmath>

namespace gnr::ranker {

View parse_view(const std::string& name) {
  if (name == "semantic" || name == "sem") return View::kSemantic;
  if (name == "theme") return View::kTheme;
  if (name == "dual") return View::kDual;
  throw ConfigError("unknown view '" + name + "' (expected semantic, theme or dual)");
}

std::string to_string(View view) {
  switch (view) {
    case View::kSemantic:
      return "semantic";
    case View::kTheme:
      return "theme";
    case View::kDual:
      return "dual";
  }
  return "?";
}

std::string semantic_text(const NewsArticle& article) {
  return article.abstract.empty() ? article.title : article.title + " " + article.abstract;
}

std::string theme_text(const NewsArticle& article) {
  return article.theme_topics ? text::join(*article.theme_topics, " ") : std::string();
}

const Vector& EncodedNews::view(View v) const {
  switch (v) {
    case View::kSemantic:
      return semantic;
    case View::kTheme:
      return theme;
    case View::kDual:
      return dual.dual;
  }
  return dual.dual;
}

RankerModel::RankerModel(textenc::Vocabulary vocab, textenc::EncoderConfig config, View news_view, View user_view,
                         std::uint64_t seed)
    : semantic_encoder("news_semantic", vocab.size(), config.dim, config.heads),
      theme_encoder("news_theme", vocab.size(), config.dim, config.heads),
      combiner("combiner", config.dim),
      user_encoder("user", config.dim),
      vocab_(std::move(vocab)),
      config_(config),
      news_view_(news_view),
      user_view_(user_view),
      seed_(seed) {
  Rng rng(seed);
  nn::init_uniform(params(), rng, config_.init_scale);
}

nn::ParamRefs RankerModel::params() {
  nn::ParamRefs out = semantic_encoder.params();
  for (auto* p : theme_encoder.params()) out.push_back(p);
  for (auto* p : combiner.params()) out.push_back(p);
  for (auto* p : user_encoder.params()) out.push_back(p);
  return out;
}

nn::ConstParamRefs RankerModel::params() const { return nn::as_const(const_cast<RankerModel*>(this)->params()); }

namespace {

bool uses(View a, View b, View wanted) { return a == wanted || b == wanted; }

struct Needs {
  bool semantic = false;
  bool theme = false;
  bool dual = false;
};

Needs needs_for(const RankerModel& m) {
  Needs n;
  n.dual = uses(m.news_view(), m.user_view(), View::kDual);
  n.semantic = n.dual || uses(m.news_view(), m.user_view(), View::kSemantic);
  n.theme = n.dual || uses(m.news_view(), m.user_view(), View::kTheme);
  return n;
}

struct ArticleForward {
  textenc::TextEncoder::Cache semantic_cache;
  textenc::TextEncoder::Cache theme_cache;
  nn::MultiViewCombiner::Cache combiner_cache;
  EncodedNews encoded;
  Vector d_semantic;
  Vector d_theme;
  Vector d_dual;

  Vector& grad_for(View v) {
    switch (v) {
      case View::kSemantic:
        return d_semantic;
      case View::kTheme:
        return d_theme;
      case View::kDual:
        return d_dual;
    }
    return d_dual;
  }
};

void encode_into(const RankerModel& model, const NewsArticle& article, const Needs& needs, ArticleForward* fw,
                 EncodedNews& out) {
  const auto& cfg = model.config();
  const int d = cfg.dim;
  out.semantic = Vector::Zero(d);
  out.theme = Vector::Zero(d);
  if (needs.semantic) {
    out.semantic = model.semantic_encoder.encode(textenc::tokenize(semantic_text(article), model.vocab(), cfg.max_len),
                                                 fw ? &fw->semantic_cache : nullptr);
  }
  if (needs.theme) {
    out.theme = model.theme_encoder.encode(textenc::tokenize(theme_text(article), model.vocab(), cfg.theme_max_len),
                                           fw ? &fw->theme_cache : nullptr);
  }
  if (needs.dual) {
    out.dual = model.combiner.forward(out.semantic, out.theme, fw ? &fw->combiner_cache : nullptr);
  } else {
    out.dual.semantic = out.semantic;
    out.dual.theme = out.theme;
    out.dual.dual = Vector::Zero(d);
  }
}

}  // namespace

EncodedNews RankerModel::encode(const NewsArticle& article) const {
  EncodedNews out;
  Needs all{true, true, true};
  encode_into(*this, article, all, nullptr, out);
  return out;
}

Vector RankerModel::news_vector(const NewsArticle& article) const {
  EncodedNews out;
  encode_into(*this, article, needs_for(*this), nullptr, out);
  return out.view(news_view_);
}

Vector RankerModel::user_vector(const std::vector<const NewsArticle*>& history) const {
  if (history.empty()) throw DataError("cannot encode a user with an empty history");
  const Needs needs = needs_for(*this);
  std::vector<Vector> items;
  items.reserve(history.size());
  for (const auto* a : history) {
    EncodedNews enc;
    encode_into(*this, *a, needs, nullptr, enc);
    items.push_back(enc.view(user_view_));
  }
  return user_encoder.encode(items);
}

Vector RankerModel::user_vector(const Impression& imp, const CorpusStore& store) const {
  std::vector<const NewsArticle*> history;
  history.reserve(imp.history.size());
  for (const auto& id : imp.history) history.push_back(&store.at(id));
  return user_vector(history);
}

double score_pair(const Vector& user, const Vector& news) {
  if (user.size() != news.size()) {
    throw ShapeError("score_pair: dimension mismatch (" + std::to_string(user.size()) + " vs " +
                     std::to_string(news.size()) + ")");
  }
  return user.dot(news);
}

double click_probability(double pos_score, const std::vector<double>& neg_scores) {
  double m = pos_score;
  for (double s : neg_scores) m = std::max(m, s);
  double z = std::exp(pos_score - m);
  const double num = z;
  for (double s : neg_scores) z += std::exp(s - m);
  return num / z;
}

double ranking_batch_loss(RankerModel& model, const std::vector<RankingSample>& samples, const CorpusStore& store,
                          bool with_grad) {
  if (samples.empty()) return 0.0;
  const Needs needs = needs_for(model);
  const int d = model.config().dim;

  // Encode every distinct article once; gradients are accumulated per article
  // and pushed through the encoders in first-use order.
  std::vector<ArticleForward> forwards;
  std::unordered_map<std::string, std::size_t> slot;
  auto get = [&](const std::string& id) -> ArticleForward& {
    auto it = slot.find(id);
    if (it != slot.end()) return forwards[it->second];
    slot.emplace(id, forwards.size());
    forwards.emplace_back();
    ArticleForward& fw = forwards.back();
    encode_into(model, store.at(id), needs, with_grad ? &fw : nullptr, fw.encoded);
    fw.d_semantic = Vector::Zero(d);
    fw.d_theme = Vector::Zero(d);
    fw.d_dual = Vector::Zero(d);
    return fw;
  };
  for (const auto& s : samples) {
    for (const auto& id : s.history) get(id);
    get(s.positive);
    for (const auto& id : s.negatives) get(id);
  }

  const double inv_batch = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  for (const auto& s : samples) {
    std::vector<Vector> items;
    items.reserve(s.history.size());
    for (const auto& id : s.history) items.push_back(forwards[slot.at(id)].encoded.view(model.user_view()));
    textenc::UserEncoder::Cache ucache;
    const Vector user = model.user_encoder.encode(items, with_grad ? &ucache : nullptr);

    std::vector<const std::string*> cands{&s.positive};
    for (const auto& id : s.negatives) cands.push_back(&id);
    Vector scores(static_cast<Eigen::Index>(cands.size()));
    for (std::size_t j = 0; j < cands.size(); ++j) {
      scores(static_cast<Eigen::Index>(j)) = user.dot(forwards[slot.at(*cands[j])].encoded.view(model.news_view()));
    }
    const double m = scores.maxCoeff();
    const double lse = m + std::log((scores.array() - m).exp().sum());
    total += lse - scores(0);

    if (!with_grad) continue;
    Vector dy = nn::softmax(scores);
    dy(0) -= 1.0;
    dy *= inv_batch;
    Vector d_user = Vector::Zero(d);
    for (std::size_t j = 0; j < cands.size(); ++j) {
      auto& fw = forwards[slot.at(*cands[j])];
      const double g = dy(static_cast<Eigen::Index>(j));
      d_user += g * fw.encoded.view(model.news_view());
      fw.grad_for(model.news_view()) += g * user;
    }
    const auto d_items = model.user_encoder.backward(ucache, d_user);
    for (std::size_t i = 0; i < s.history.size(); ++i) {
      forwards[slot.at(s.history[i])].grad_for(model.user_view()) += d_items[i];
    }
  }

  if (with_grad) {
    for (auto& fw : forwards) {
      if (needs.dual) {
        auto [ds, dt] = model.combiner.backward(fw.combiner_cache, fw.d_dual);
        fw.d_semantic += ds;
        fw.d_theme += dt;
      }
      if (needs.semantic) model.semantic_encoder.backward(fw.semantic_cache, fw.d_semantic);
      if (needs.theme) model.theme_encoder.backward(fw.theme_cache, fw.d_theme);
    }
  }
  return total * inv_batch;
}

TrainReport train_ranker(RankerModel& model, const std::vector<Impression>& imps, const CorpusStore& store,
                         const TrainConfig& config) {
  if (config.k_neg < 1) throw ConfigError("k_neg must be at least 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");

  struct Base {
    const Impression* imp;
    std::string positive;
    std::vector<std::string> negatives;
  };
  std::vector<Base> base;
  TrainReport report;
  for (const auto& imp : imps) {
    std::vector<std::string> pos, neg;
    for (const auto& c : imp.candidates) (c.clicked ? pos : neg).push_back(c.news_id);
    if (pos.empty() || neg.empty() || imp.history.empty()) {
      ++report.skipped_impressions;
      continue;
    }
    for (auto& p : pos) base.push_back({&imp, p, neg});
  }
  if (base.empty()) throw DataError("train_ranker: no usable impressions (need history, a click and a non-click)");
  report.samples = base.size();

  Rng rng(config.seed);
  auto params = model.params();
  nn::Optimizer opt(config.optimizer, params);
  std::vector<std::size_t> order(base.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<RankingSample> batch;
      for (std::size_t i = start; i < end; ++i) {
        const Base& b = base[order[i]];
        RankingSample s{b.imp->history, b.positive, {}};
        if (b.negatives.size() >= config.k_neg) {
          for (auto idx : rng.sample_without_replacement(b.negatives.size(), config.k_neg)) {
            s.negatives.push_back(b.negatives[idx]);
          }
        } else {
          ++report.sampled_with_replacement;
          for (std::size_t k = 0; k < config.k_neg; ++k) s.negatives.push_back(b.negatives[rng.below(b.negatives.size())]);
        }
        batch.push_back(std::move(s));
      }
      nn::zero_grad(params);
      const double loss = ranking_batch_loss(model, batch, store, true);
      opt.step(params);
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    report.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  if (!nn::all_finite(params)) throw Error("train_ranker: parameters diverged to non-finite values");
  model.k_neg = config.k_neg;
  return report;
}

void sort_scored(std::vector<ScoredCandidate>& scored) {
  std::sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.news_id < b.news_id;
  });
}

std::vector<ScoredCandidate> rank_candidates(const RankerModel& model, const Impression& imp,
                                             const CorpusStore& store) {
  if (imp.history.empty()) throw DataError("rank_candidates: impression " + imp.impression_id + " has no history");
  if (imp.candidates.empty()) throw DataError("rank_candidates: impression " + imp.impression_id + " has no candidates");
  const Vector user = model.user_vector(imp, store);
  std::vector<ScoredCandidate> scored;
  for (const auto& c : imp.candidates) {
    scored.push_back({c.news_id, score_pair(user, model.news_vector(store.at(c.news_id)))});
  }
  sort_scored(scored);
  return scored;
}

std::string select_focal(const std::vector<ScoredCandidate>& ranked) {
  if (ranked.empty()) throw DataError("select_focal: empty ranking");
  return ranked.front().news_id;
}

std::string ground_truth_focal(const Impression& imp) {
  for (const auto& c : imp.candidates) {
    if (c.clicked) return c.news_id;
  }
  throw DataError("impression " + imp.impression_id + " has no clicked candidate");
}

namespace {

nlohmann::json encoder_config_json(const textenc::EncoderConfig& c) {
  return {{"dim", c.dim},           {"heads", c.heads},       {"max_len", c.max_len},
          {"theme_max_len", c.theme_max_len}, {"min_freq", c.min_freq}, {"init_scale", c.init_scale}};
}

textenc::EncoderConfig encoder_config_from(const nlohmann::json& j) {
  textenc::EncoderConfig c;
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.theme_max_len = j.at("theme_max_len").get<std::size_t>();
  c.min_freq = j.at("min_freq").get<std::size_t>();
  c.init_scale = j.at("init_scale").get<double>();
  return c;
}

}  // namespace

void save_ranker(const RankerModel& model, const std::filesystem::path& prefix) {
  nlohmann::json header = {{"news_view", to_string(model.news_view())},
                           {"user_view", to_string(model.user_view())},
                           {"encoder", encoder_config_json(model.config())},
                           {"k_neg", model.k_neg},
                           {"seed", model.seed()},
                           {"vocab", model.vocab().tokens()}};
  textenc::save_checkpoint(prefix, "ranker", header, model.params());
}

RankerModel load_ranker(const std::filesystem::path& prefix, const textenc::EncoderConfig& config) {
  const auto ck = textenc::read_checkpoint(prefix, "ranker");
  try {
    const auto& h = ck.header;
    RankerModel model(textenc::Vocabulary::from_tokens(h.at("vocab").get<std::vector<std::string>>()), config,
                      parse_view(h.at("news_view").get<std::string>()),
                      parse_view(h.at("user_view").get<std::string>()), h.at("seed").get<std::uint64_t>());
    textenc::assign_tensors(ck, model.params());
    model.k_neg = h.at("k_neg").get<std::size_t>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ranker header in " + prefix.string() + ": " + e.what());
  }
}

RankerModel load_ranker(const std::filesystem::path& prefix) {
  const auto ck = textenc::read_checkpoint(prefix, "ranker");
  try {
    return load_ranker(prefix, encoder_config_from(ck.header.at("encoder")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ranker header in " + prefix.string() + ": " + e.what());
  }
}

}  // namespace gnr::ranker
