#include "gnr/uift.hpp"

#include "gnr/checkpoint.hpp"
#include "gnr/text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace gnr::uift {

ToyGenerator::ToyGenerator(textenc::Vocabulary vocab, GeneratorConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), config_(config), seed_(seed) {
  if (config_.context < 2) throw ConfigError("generator context must be at least 2");
  sep_ = vocab_.contains(kSepToken) ? vocab_.index(kSepToken) : vocab_.add(kSepToken);
  eos_ = vocab_.contains(kEosToken) ? vocab_.index(kEosToken) : vocab_.add(kEosToken);
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  token_embedding = nn::Embedding("generator.embedding", v, config_.dim);
  position = nn::Param("generator.position", static_cast<Eigen::Index>(config_.context), config_.dim);
  attention = nn::SelfAttention("generator.attention", config_.dim, config_.heads, true);
  out_w = nn::Param("generator.out_w", config_.dim, v);
  out_b = nn::Param("generator.out_b", 1, v);
  Rng rng(seed);
  nn::init_uniform(params(), rng, config_.init_scale);
}

nn::ParamRefs ToyGenerator::params() {
  nn::ParamRefs out = token_embedding.params();
  out.push_back(&position);
  for (auto* p : attention.params()) out.push_back(p);
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

Matrix ToyGenerator::forward(const std::vector<int>& ids, Cache* cache) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) throw DataError("generator input is empty");
  if (n > position.value.rows()) throw DataError("generator input exceeds the context length");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) throw ShapeError("token id outside the vocabulary");
  }
  const Matrix x = token_embedding.forward(ids) + position.value.topRows(n);
  Matrix h = x + attention.forward(x, cache ? &cache->attention : nullptr);
  Matrix logits = h * out_w.value;
  logits.rowwise() += out_b.value.row(0);
  if (cache != nullptr) {
    cache->ids = ids;
    cache->h = std::move(h);
  }
  return logits;
}

void ToyGenerator::backward(const Cache& cache, const Matrix& d_logits) {
  out_w.grad += cache.h.transpose() * d_logits;
  out_b.grad += d_logits.colwise().sum();
  const Matrix dh = d_logits * out_w.value.transpose();
  const Matrix dx = dh + attention.backward(cache.attention, dh);
  token_embedding.backward(cache.ids, dx);
  position.grad.topRows(dx.rows()) += dx;
}

std::vector<int> ToyGenerator::encode(const std::string& text) const {
  std::vector<int> out;
  for (const auto& w : text::words(text)) out.push_back(vocab_.index(w));
  return out;
}

std::string ToyGenerator::decode(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == textenc::kPad || id == sep_ || id == eos_) continue;
    words.push_back(vocab_.token(id));
  }
  return text::join(words, " ");
}

textenc::Vocabulary generator_vocabulary(const std::vector<std::string>& texts) {
  auto vocab = textenc::Vocabulary::build(texts, 1);
  vocab.add(kSepToken);
  vocab.add(kEosToken);
  return vocab;
}

SequenceInput build_input(const ToyGenerator& model, const textenc::TokenSeq& condition,
                          const textenc::TokenSeq& sequence) {
  std::vector<int> seq;
  for (int t : sequence) {
    if (t != textenc::kPad) seq.push_back(t);
  }
  if (seq.empty()) throw DataError("sequence is empty after tokenization");
  const std::size_t context = model.config().context;
  if (seq.size() > context - 1) seq.resize(context - 1);
  const std::size_t room = context - 1 - seq.size();
  SequenceInput in;
  for (int t : condition) {
    if (t == textenc::kPad) continue;
    if (in.ids.size() == room) break;
    in.ids.push_back(t);
  }
  in.ids.push_back(model.sep());
  in.first_target = in.ids.size();
  in.ids.insert(in.ids.end(), seq.begin(), seq.end());
  return in;
}

namespace {

double row_logsumexp(const Matrix& m, Eigen::Index r) {
  const double mx = m.row(r).maxCoeff();
  return mx + std::log((m.row(r).array() - mx).exp().sum());
}

}  // namespace

std::vector<double> token_logprobs(const ToyGenerator& model, const SequenceInput& input) {
  const Matrix logits = model.forward(input.ids);
  std::vector<double> out;
  for (std::size_t t = input.first_target; t < input.ids.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t - 1);
    out.push_back(logits(row, input.ids[t]) - row_logsumexp(logits, row));
  }
  return out;
}

double seq_logprob_norm(ToyGenerator& model, const SequenceInput& input, double grad_scale) {
  const bool with_grad = grad_scale != 0.0;
  ToyGenerator::Cache cache;
  const Matrix logits = model.forward(input.ids, with_grad ? &cache : nullptr);
  const double len = static_cast<double>(input.ids.size() - input.first_target);
  double total = 0.0;
  Matrix d_logits;
  if (with_grad) d_logits = Matrix::Zero(logits.rows(), logits.cols());
  for (std::size_t t = input.first_target; t < input.ids.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t - 1);
    const double lse = row_logsumexp(logits, row);
    total += logits(row, input.ids[t]) - lse;
    if (with_grad) {
      d_logits.row(row) -= (logits.row(row).array() - lse).exp().matrix() * (grad_scale / len);
      d_logits(row, input.ids[t]) += grad_scale / len;
    }
  }
  if (with_grad) model.backward(cache, d_logits);
  return total / len;
}

double seq_logprob_norm(const ToyGenerator& model, const textenc::TokenSeq& condition,
                        const textenc::TokenSeq& sequence) {
  const auto lp = token_logprobs(model, build_input(model, condition, sequence));
  return std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size());
}

double seq_logprob_norm(const ToyGenerator& model, const std::string& condition, const std::string& sequence) {
  return seq_logprob_norm(model, model.encode(condition), model.encode(sequence));
}

std::string to_string(Role role) {
  switch (role) {
    case kGnr:
      return "gnr";
    case kChatgpt:
      return "chatgpt";
    case kFocal:
      return "focal";
  }
  return "?";
}

Role parse_role(const std::string& name) {
  if (name == "gnr") return kGnr;
  if (name == "chatgpt") return kChatgpt;
  if (name == "focal") return kFocal;
  throw DataError("unknown candidate role '" + name + "'");
}

void validate_ranks(const Ranks& ranks) {
  Ranks sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != Ranks{1, 2, 3}) throw DataError("ranks must be a permutation of 1, 2, 3");
}

double uift_loss(const Triple3& p, const Ranks& r) {
  validate_ranks(r);
  double loss = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (r[i] < r[j]) loss += std::max(0.0, p[j] - p[i]);
    }
  }
  return loss;
}

Triple3 uift_loss_grad(const Triple3& p, const Ranks& r) {
  validate_ranks(r);
  Triple3 g{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (r[i] < r[j] && p[j] - p[i] > 0.0) {
        g[j] += 1.0;
        g[i] -= 1.0;
      }
    }
  }
  return g;
}

double pair_violations(const Triple3& p, const Ranks& r) {
  validate_ranks(r);
  int bad = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (r[i] < r[j] && p[j] >= p[i]) ++bad;
    }
  }
  return bad / 3.0;
}

namespace {

SequenceInput sft_input(const ToyGenerator& model, const SftExample& ex) {
  auto target = model.encode(ex.target);
  if (target.size() > model.config().context - 2) target.resize(model.config().context - 2);
  target.push_back(model.eos());
  return build_input(model, model.encode(ex.condition), target);
}

Triple3 triple_probs(const ToyGenerator& model, const NarrativeTriple& t, std::array<SequenceInput, 3>* inputs) {
  Triple3 p{};
  const auto cond = model.encode(t.condition);
  for (std::size_t k = 0; k < 3; ++k) {
    auto in = build_input(model, cond, model.encode(t.texts[k]));
    const auto lp = token_logprobs(model, in);
    p[k] = std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size());
    if (inputs != nullptr) (*inputs)[k] = std::move(in);
  }
  return p;
}

}  // namespace

double sft_loss(ToyGenerator& model, const std::vector<SftExample>& examples, bool with_grad) {
  if (examples.empty()) throw DataError("sft_loss: no examples");
  const double inv = 1.0 / static_cast<double>(examples.size());
  double total = 0.0;
  for (const auto& ex : examples) {
    const auto in = sft_input(model, ex);
    total -= seq_logprob_norm(model, in, with_grad ? -inv : 0.0);
  }
  return total * inv;
}

std::vector<double> train_sft(ToyGenerator& model, const std::vector<SftExample>& examples,
                              const GenTrainConfig& config) {
  if (examples.empty()) throw DataError("train_sft: no examples");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  Rng rng(config.seed);
  auto params = model.params();
  nn::Optimizer opt(config.optimizer, params);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> trace;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<SftExample> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(examples[order[i]]);
      }
      nn::zero_grad(params);
      sft_loss(model, batch, true);
      opt.step(params);
    }
    trace.push_back(sft_loss(model, examples, false));
  }
  if (!nn::all_finite(params)) throw Error("train_sft: parameters diverged to non-finite values");
  return trace;
}

double uift_batch_loss(ToyGenerator& model, const std::vector<NarrativeTriple>& triples, bool with_grad) {
  if (triples.empty()) throw DataError("uift: no triples");
  const double inv = 1.0 / static_cast<double>(triples.size());
  double total = 0.0;
  for (const auto& t : triples) {
    std::array<SequenceInput, 3> inputs;
    const Triple3 p = triple_probs(model, t, &inputs);
    total += uift_loss(p, t.ranks);
    if (!with_grad) continue;
    const Triple3 g = uift_loss_grad(p, t.ranks);
    for (std::size_t k = 0; k < 3; ++k) {
      if (g[k] != 0.0) seq_logprob_norm(model, inputs[k], g[k] * inv);
    }
  }
  return total * inv;
}

double violation_rate(const ToyGenerator& model, const std::vector<NarrativeTriple>& triples) {
  if (triples.empty()) throw DataError("violation_rate: no triples");
  double total = 0.0;
  for (const auto& t : triples) total += pair_violations(triple_probs(model, t, nullptr), t.ranks);
  return total / static_cast<double>(triples.size());
}

UiftReport train_uift(ToyGenerator& model, const std::vector<NarrativeTriple>& triples, const GenTrainConfig& config) {
  if (triples.empty()) throw DataError("train_uift: no triples");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  for (const auto& t : triples) validate_ranks(t.ranks);
  Rng rng(config.seed);
  auto params = model.params();
  nn::Optimizer opt(config.optimizer, params);
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  UiftReport report;
  report.violation_trace.push_back(violation_rate(model, triples));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<NarrativeTriple> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(triples[order[i]]);
      }
      nn::zero_grad(params);
      uift_batch_loss(model, batch, true);
      opt.step(params);
    }
    report.loss_trace.push_back(uift_batch_loss(model, triples, false));
    report.violation_trace.push_back(violation_rate(model, triples));
  }
  if (!nn::all_finite(params)) throw Error("train_uift: parameters diverged to non-finite values");
  return report;
}

Ranks ranks_from_scores(const Triple3& scores) {
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Ranks r{};
  for (std::size_t pos = 0; pos < 3; ++pos) r[order[pos]] = static_cast<int>(pos + 1);
  return r;
}

corpus::NewsArticle pseudo_article(const std::string& text, const std::string& id) {
  corpus::NewsArticle a;
  a.id = id;
  const auto sents = text::sentences(text);
  a.title = sents.empty() ? std::string(text::trim(text)) : sents.front();
  std::vector<std::string> rest(sents.size() > 1 ? sents.begin() + 1 : sents.end(), sents.end());
  a.abstract = text::join(rest, " ");
  return a;
}

Ranks rank_triple(const ranker::RankerModel& recommender, const corpus::Impression& context,
                  const corpus::CorpusStore& store, const std::array<std::string, 3>& texts) {
  const Vector user = recommender.user_vector(context, store);
  Triple3 scores{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto a = pseudo_article(texts[k], "candidate-" + to_string(static_cast<Role>(k)));
    scores[k] = ranker::score_pair(user, recommender.news_vector(a));
  }
  return ranks_from_scores(scores);
}

std::string generate(const ToyGenerator& model, const std::string& condition, std::size_t max_tokens) {
  std::vector<int> ids;
  const auto cond = model.encode(condition);
  const std::size_t context = model.config().context;
  const std::size_t keep = std::min(cond.size(), context / 2);
  ids.assign(cond.begin(), cond.begin() + static_cast<std::ptrdiff_t>(keep));
  ids.push_back(model.sep());
  std::vector<int> out;
  while (out.size() < max_tokens && ids.size() < context) {
    const Matrix logits = model.forward(ids);
    const auto last = logits.row(logits.rows() - 1);
    int best = -1;
    for (Eigen::Index v = 0; v < last.size(); ++v) {
      if (v == textenc::kPad || v == model.sep()) continue;
      if (best < 0 || last(v) > last(best)) best = static_cast<int>(v);
    }
    if (best == model.eos()) break;
    out.push_back(best);
    ids.push_back(best);
  }
  return model.decode(out);
}

void write_triples(const std::vector<NarrativeTriple>& triples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : triples) {
    nlohmann::json cands = nlohmann::json::array();
    for (std::size_t k = 0; k < 3; ++k) cands.push_back({{"role", to_string(static_cast<Role>(k))}, {"text", t.texts[k]}});
    nlohmann::json rec = {{"condition", t.condition}, {"candidates", cands}};
    if (t.has_ranks) rec["ranks"] = {{"gnr", t.ranks[0]}, {"chatgpt", t.ranks[1]}, {"focal", t.ranks[2]}};
    out << rec.dump() << '\n';
  }
}

std::vector<NarrativeTriple> read_triples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<NarrativeTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      NarrativeTriple t;
      t.condition = j.at("condition").get<std::string>();
      std::array<bool, 3> seen{false, false, false};
      for (const auto& c : j.at("candidates")) {
        const Role r = parse_role(c.at("role").get<std::string>());
        t.texts[r] = c.at("text").get<std::string>();
        seen[r] = true;
      }
      if (!seen[0] || !seen[1] || !seen[2]) throw DataError("triple needs gnr, chatgpt and focal candidates");
      if (j.contains("ranks")) {
        const auto& r = j["ranks"];
        t.ranks = {r.at("gnr").get<int>(), r.at("chatgpt").get<int>(), r.at("focal").get<int>()};
        validate_ranks(t.ranks);
        t.has_ranks = true;
      }
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_generator(const ToyGenerator& model, const std::filesystem::path& prefix) {
  const auto& c = model.config();
  nlohmann::json header = {{"dim", c.dim},
                           {"heads", c.heads},
                           {"context", c.context},
                           {"init_scale", c.init_scale},
                           {"seed", model.seed()},
                           {"vocab", model.vocab().tokens()}};
  textenc::save_checkpoint(prefix, "generator", header, model.params());
}

ToyGenerator load_generator(const std::filesystem::path& prefix) {
  const auto ck = textenc::read_checkpoint(prefix, "generator");
  try {
    const auto& h = ck.header;
    GeneratorConfig c;
    c.dim = h.at("dim").get<int>();
    c.heads = h.at("heads").get<int>();
    c.context = h.at("context").get<std::size_t>();
    c.init_scale = h.at("init_scale").get<double>();
    ToyGenerator model(textenc::Vocabulary::from_tokens(h.at("vocab").get<std::vector<std::string>>()), c,
                       h.at("seed").get<std::uint64_t>());
    textenc::assign_tensors(ck, model.params());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed generator header in " + prefix.string() + ": " + e.what());
  }
}

}  // namespace gnr::uift
