#pragma once

#include "gnr/common.hpp"
#include "gnr/rng.hpp"

#include <string>
#include <utility>
#include <vector>

// Small dense layers with explicit forward caches and hand-written backward
// passes. Backward calls accumulate into Param::grad; callers zero gradients.
namespace gnr::nn {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string param_name, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(param_name)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

using ParamRefs = std::vector<Param*>;
using ConstParamRefs = std::vector<const Param*>;

inline ConstParamRefs as_const(const ParamRefs& params) { return {params.begin(), params.end()}; }

void zero_grad(const ParamRefs& params);
void init_uniform(const ParamRefs& params, Rng& rng, double scale);
bool all_finite(const ParamRefs& params);

// Row lookup into a |V| x d table.
class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, Eigen::Index vocab_size, Eigen::Index dim);

  Matrix forward(const std::vector<int>& ids) const;
  void backward(const std::vector<int>& ids, const Matrix& d_out);
  ParamRefs params() { return {&table}; }

  Param table;
};

// Multi-head scaled dot-product self-attention without an output projection;
// head outputs are concatenated. Inputs are unpadded (n x d) sequences.
class SelfAttention {
 public:
  struct Cache {
    Matrix x;
    std::vector<Matrix> q, k, v, attn;
  };

  SelfAttention() = default;
  SelfAttention(const std::string& name, Eigen::Index dim, int heads, bool causal);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& d_out);
  ParamRefs params();

  int heads = 1;
  bool causal = false;
  std::vector<Param> wq, wk, wv;
};

// a_i = q . tanh(W h_i + b); out = sum_i softmax(a)_i h_i
class AdditivePooling {
 public:
  struct Cache {
    Matrix h;
    Matrix t;
    Vector weights;
  };

  AdditivePooling() = default;
  AdditivePooling(const std::string& name, Eigen::Index dim, Eigen::Index att_dim);

  Vector forward(const Matrix& h, Cache* cache) const;
  Matrix backward(const Cache& cache, const Vector& d_out);
  ParamRefs params() { return {&w, &b, &q}; }

  Param w, b, q;
};

struct DualEmbedding {
  Vector semantic;
  Vector theme;
  Vector dual;
  double weight_semantic = 0.5;
  double weight_theme = 0.5;
};

// Two-view attention fusion: one affine map and query per view, softmax over
// the two view scores, convex combination of the views.
class MultiViewCombiner {
 public:
  struct Cache {
    Vector es, et, ts, tt;
    double ws = 0.5, wt = 0.5;
  };

  MultiViewCombiner() = default;
  MultiViewCombiner(const std::string& name, Eigen::Index dim);

  DualEmbedding forward(const Vector& es, const Vector& et, Cache* cache) const;
  std::pair<Vector, Vector> backward(const Cache& cache, const Vector& d_dual);
  ParamRefs params() { return {&w1, &b1, &q1, &w2, &b2, &q2}; }

  Param w1, b1, q1, w2, b2, q2;
};

// Numerically stable softmax of a vector.
Vector softmax(const Vector& scores);

}  // namespace gnr::nn
