#pragma once

#include "gnr/optim.hpp"
#include "gnr/ranker.hpp"
#include "gnr/vocab.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gnr::uift {

inline constexpr const char* kSepToken = "<sep>";
inline constexpr const char* kEosToken = "<eos>";

struct GeneratorConfig {
  int dim = 32;
  int heads = 2;
  std::size_t context = 64;
  double init_scale = 0.1;
};

// Word-level causal language model: token + position embeddings, one causal
// self-attention layer with a residual connection, linear projection to logits.
// Inputs are `condition <sep> sequence`.
class ToyGenerator {
 public:
  struct Cache {
    std::vector<int> ids;
    nn::SelfAttention::Cache attention;
    Matrix h;
  };

  // `<sep>` and `<eos>` are appended to the vocabulary when missing.
  ToyGenerator(textenc::Vocabulary vocab, GeneratorConfig config, std::uint64_t seed);

  // n x |V| next-token logits, one row per input position.
  Matrix forward(const std::vector<int>& ids, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Matrix& d_logits);

  nn::ParamRefs params();
  nn::ConstParamRefs params() const { return nn::as_const(const_cast<ToyGenerator*>(this)->params()); }

  const textenc::Vocabulary& vocab() const { return vocab_; }
  const GeneratorConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  int sep() const { return sep_; }
  int eos() const { return eos_; }

  // Word ids of `text` without padding; unknown words map to UNK.
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  nn::Embedding token_embedding;
  nn::Param position;
  nn::SelfAttention attention;
  nn::Param out_w;  // d x |V|
  nn::Param out_b;  // 1 x |V|

 private:
  textenc::Vocabulary vocab_;
  GeneratorConfig config_;
  std::uint64_t seed_;
  int sep_ = 0;
  int eos_ = 0;
};

// Vocabulary over the words of `texts` (min_freq 1) plus `<sep>` and `<eos>`.
textenc::Vocabulary generator_vocabulary(const std::vector<std::string>& texts);

// Assembled model input. Sequence tokens are predicted from the preceding
// position; the condition is truncated so the whole input fits the context.
struct SequenceInput {
  std::vector<int> ids;
  std::size_t first_target = 0;  // index in ids of the first sequence token
};

// PAD entries of `condition` are dropped. Throws DataError on an empty sequence.
SequenceInput build_input(const ToyGenerator& model, const textenc::TokenSeq& condition,
                          const textenc::TokenSeq& sequence);

// Sum of log P(s_t | condition, s_<t) over the sequence divided by its length.
// With `grad_scale` != 0 accumulates grad_scale * d(result)/d(params).
double seq_logprob_norm(ToyGenerator& model, const SequenceInput& input, double grad_scale);
double seq_logprob_norm(const ToyGenerator& model, const std::string& condition, const std::string& sequence);
double seq_logprob_norm(const ToyGenerator& model, const textenc::TokenSeq& condition,
                        const textenc::TokenSeq& sequence);

// Per-token log-probabilities of the sequence (chain-rule terms).
std::vector<double> token_logprobs(const ToyGenerator& model, const SequenceInput& input);

enum Role : std::size_t { kGnr = 0, kChatgpt = 1, kFocal = 2 };
std::string to_string(Role role);
Role parse_role(const std::string& name);

using Triple3 = std::array<double, 3>;
using Ranks = std::array<int, 3>;

void validate_ranks(const Ranks& ranks);

// Sum over pairs with r_i < r_j of max(0, p_j - p_i).
double uift_loss(const Triple3& probs, const Ranks& ranks);
// d uift_loss / d p (subgradient 0 at kinks).
Triple3 uift_loss_grad(const Triple3& probs, const Ranks& ranks);
// Fraction of the 3 ordered pairs with p_j >= p_i although r_i < r_j.
double pair_violations(const Triple3& probs, const Ranks& ranks);

struct NarrativeTriple {
  std::string condition;
  std::array<std::string, 3> texts;  // indexed by Role
  Ranks ranks{1, 2, 3};
  bool has_ranks = false;
};

struct SftExample {
  std::string condition;
  std::string target;
};

struct GenTrainConfig {
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 1e-2};
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t seed = 42;
};

// Mean next-token cross-entropy of target + <eos> over the examples.
double sft_loss(ToyGenerator& model, const std::vector<SftExample>& examples, bool with_grad);
// Returns the full-set SFT loss after each epoch.
std::vector<double> train_sft(ToyGenerator& model, const std::vector<SftExample>& examples,
                              const GenTrainConfig& config);

// Mean uift_loss over triples; with_grad accumulates its gradient.
double uift_batch_loss(ToyGenerator& model, const std::vector<NarrativeTriple>& triples, bool with_grad);
double violation_rate(const ToyGenerator& model, const std::vector<NarrativeTriple>& triples);

struct UiftReport {
  std::vector<double> violation_trace;  // before training, then after each epoch
  std::vector<double> loss_trace;       // mean uift loss after each epoch
};

UiftReport train_uift(ToyGenerator& model, const std::vector<NarrativeTriple>& triples, const GenTrainConfig& config);

// Rank 1 = highest score; ties by role order gnr < chatgpt < focal.
Ranks ranks_from_scores(const Triple3& scores);
// Scores each text as a pseudo-article (title = first sentence, abstract = rest)
// against the impression's user vector.
Ranks rank_triple(const ranker::RankerModel& recommender, const corpus::Impression& context,
                  const corpus::CorpusStore& store, const std::array<std::string, 3>& texts);
corpus::NewsArticle pseudo_article(const std::string& text, const std::string& id);

// Greedy decoding until <eos> or `max_tokens`.
std::string generate(const ToyGenerator& model, const std::string& condition, std::size_t max_tokens);

void write_triples(const std::vector<NarrativeTriple>& triples, const std::filesystem::path& path);
std::vector<NarrativeTriple> read_triples(const std::filesystem::path& path);

void save_generator(const ToyGenerator& model, const std::filesystem::path& prefix);
ToyGenerator load_generator(const std::filesystem::path& prefix);

}  // namespace gnr::uift
