#pragma once

#include "gnr/common.hpp"
#include "gnr/nn.hpp"
#include "gnr/vocab.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace gnr::textenc {

using nn::DualEmbedding;

struct EncoderConfig {
  int dim = 64;
  int heads = 4;
  std::size_t max_len = 32;        // title followed by abstract
  std::size_t theme_max_len = 16;  // joined theme topics
  std::size_t min_freq = 2;
  double init_scale = 0.1;
};

// Embedding lookup -> one multi-head self-attention layer -> additive pooling.
// PAD positions are dropped before attention, so they are masked from both
// attention and pooling.
class TextEncoder {
 public:
  struct Cache {
    std::vector<int> ids;
    nn::SelfAttention::Cache attention;
    nn::AdditivePooling::Cache pooling;
  };

  TextEncoder() = default;
  TextEncoder(const std::string& name, std::size_t vocab_size, int dim, int heads);

  // Zero vector for an all-PAD sequence.
  Vector encode(const TokenSeq& tokens, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Vector& d_out);

  nn::ParamRefs params();
  int dim() const { return static_cast<int>(embedding.table.value.cols()); }

  nn::Embedding embedding;
  nn::SelfAttention attention;
  nn::AdditivePooling pooling;
};

// Additive attention pooling over a sequence of item vectors.
class UserEncoder {
 public:
  using Cache = nn::AdditivePooling::Cache;

  UserEncoder() = default;
  UserEncoder(const std::string& name, int dim);

  Vector encode(const std::vector<Vector>& items, Cache* cache = nullptr) const;
  std::vector<Vector> backward(const Cache& cache, const Vector& d_out);
  nn::ParamRefs params() { return pooling.params(); }

  nn::AdditivePooling pooling;
};

Vector encode_text(const TokenSeq& tokens, const TextEncoder& encoder);
DualEmbedding combine_dual(const Vector& semantic, const Vector& theme, const nn::MultiViewCombiner& combiner);
// Pools the dual vectors of the history; throws DataError on an empty history.
Vector encode_user(const std::vector<DualEmbedding>& history, const UserEncoder& encoder);

}  // namespace gnr::textenc
