#include "gnr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnr::nn {

void zero_grad(const ParamRefs& params) {
  for (auto* p : params) p->grad.setZero();
}

void init_uniform(const ParamRefs& params, Rng& rng, double scale) {
  for (auto* p : params) {
    // Column-major fill order keeps initialization independent of Eigen internals.
    for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) p->value(r, c) = rng.uniform(-scale, scale);
    }
    p->grad.setZero();
  }
}

bool all_finite(const ParamRefs& params) {
  for (auto* p : params) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

Vector softmax(const Vector& scores) {
  const double m = scores.maxCoeff();
  Vector e = (scores.array() - m).exp().matrix();
  return e / e.sum();
}

Embedding::Embedding(const std::string& name, Eigen::Index vocab_size, Eigen::Index dim)
    : table(name + ".table", vocab_size, dim) {}

Matrix Embedding::forward(const std::vector<int>& ids) const {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  return out;
}

void Embedding::backward(const std::vector<int>& ids, const Matrix& d_out) {
  for (std::size_t i = 0; i < ids.size(); ++i) table.grad.row(ids[i]) += d_out.row(static_cast<Eigen::Index>(i));
}

SelfAttention::SelfAttention(const std::string& name, Eigen::Index dim, int num_heads, bool is_causal)
    : heads(num_heads), causal(is_causal) {
  if (num_heads <= 0 || dim % num_heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " is not divisible by heads " +
                      std::to_string(num_heads));
  }
  const Eigen::Index dk = dim / num_heads;
  for (int h = 0; h < num_heads; ++h) {
    const std::string suffix = std::to_string(h);
    wq.emplace_back(name + ".wq" + suffix, dim, dk);
    wk.emplace_back(name + ".wk" + suffix, dim, dk);
    wv.emplace_back(name + ".wv" + suffix, dim, dk);
  }
}

ParamRefs SelfAttention::params() {
  ParamRefs out;
  for (int h = 0; h < heads; ++h) {
    out.push_back(&wq[h]);
    out.push_back(&wk[h]);
    out.push_back(&wv[h]);
  }
  return out;
}

Matrix SelfAttention::forward(const Matrix& x, Cache* cache) const {
  const Eigen::Index n = x.rows();
  const Eigen::Index dk = wq.front().value.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix out(n, dk * heads);
  if (cache != nullptr) {
    cache->x = x;
    cache->q.assign(heads, {});
    cache->k.assign(heads, {});
    cache->v.assign(heads, {});
    cache->attn.assign(heads, {});
  }
  for (int h = 0; h < heads; ++h) {
    Matrix q = x * wq[h].value;
    Matrix k = x * wk[h].value;
    Matrix v = x * wv[h].value;
    Matrix s = (q * k.transpose()) * scale;
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index visible = causal ? i + 1 : n;
      const double m = s.row(i).head(visible).maxCoeff();
      double z = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        a(i, j) = j < visible ? std::exp(s(i, j) - m) : 0.0;
        z += a(i, j);
      }
      a.row(i) /= z;
    }
    out.middleCols(h * dk, dk) = a * v;
    if (cache != nullptr) {
      cache->q[h] = std::move(q);
      cache->k[h] = std::move(k);
      cache->v[h] = std::move(v);
      cache->attn[h] = std::move(a);
    }
  }
  return out;
}

Matrix SelfAttention::backward(const Cache& cache, const Matrix& d_out) {
  const Eigen::Index dk = wq.front().value.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix dx = Matrix::Zero(cache.x.rows(), cache.x.cols());
  for (int h = 0; h < heads; ++h) {
    const Matrix& a = cache.attn[h];
    const Matrix dh = d_out.middleCols(h * dk, dk);
    const Matrix da = dh * cache.v[h].transpose();
    const Matrix dv = a.transpose() * dh;
    const Vector row_dot = (da.array() * a.array()).rowwise().sum();
    const Matrix ds = (a.array() * (da.colwise() - row_dot).array()).matrix() * scale;
    const Matrix dq = ds * cache.k[h];
    const Matrix dkm = ds.transpose() * cache.q[h];
    wq[h].grad += cache.x.transpose() * dq;
    wk[h].grad += cache.x.transpose() * dkm;
    wv[h].grad += cache.x.transpose() * dv;
    dx += dq * wq[h].value.transpose() + dkm * wk[h].value.transpose() + dv * wv[h].value.transpose();
  }
  return dx;
}

AdditivePooling::AdditivePooling(const std::string& name, Eigen::Index dim, Eigen::Index att_dim)
    : w(name + ".w", att_dim, dim), b(name + ".b", att_dim, 1), q(name + ".q", att_dim, 1) {}

Vector AdditivePooling::forward(const Matrix& h, Cache* cache) const {
  Matrix t = ((h * w.value.transpose()).rowwise() + b.value.col(0).transpose()).array().tanh().matrix();
  const Vector scores = t * q.value.col(0);
  Vector weights = softmax(scores);
  Vector out = h.transpose() * weights;
  if (cache != nullptr) {
    cache->h = h;
    cache->t = std::move(t);
    cache->weights = std::move(weights);
  }
  return out;
}

Matrix AdditivePooling::backward(const Cache& cache, const Vector& d_out) {
  const Vector& wts = cache.weights;
  const Vector g = cache.h * d_out;
  const Vector da = (wts.array() * (g.array() - wts.dot(g))).matrix();
  q.grad.col(0) += cache.t.transpose() * da;
  const Matrix du = ((da * q.value.col(0).transpose()).array() * (1.0 - cache.t.array().square())).matrix();
  w.grad += du.transpose() * cache.h;
  b.grad.col(0) += du.colwise().sum().transpose();
  return wts * d_out.transpose() + du * w.value;
}

MultiViewCombiner::MultiViewCombiner(const std::string& name, Eigen::Index dim)
    : w1(name + ".w1", dim, dim),
      b1(name + ".b1", dim, 1),
      q1(name + ".q1", dim, 1),
      w2(name + ".w2", dim, dim),
      b2(name + ".b2", dim, 1),
      q2(name + ".q2", dim, 1) {}

DualEmbedding MultiViewCombiner::forward(const Vector& es, const Vector& et, Cache* cache) const {
  if (es.size() != w1.value.cols() || et.size() != w2.value.cols()) {
    throw ShapeError("combine_dual: embedding dimension does not match combiner");
  }
  Vector ts = (w1.value * es + b1.value.col(0)).array().tanh().matrix();
  Vector tt = (w2.value * et + b2.value.col(0)).array().tanh().matrix();
  const double as = q1.value.col(0).dot(ts);
  const double at = q2.value.col(0).dot(tt);
  const double m = std::max(as, at);
  const double xs = std::exp(as - m);
  const double xt = std::exp(at - m);
  DualEmbedding out;
  out.weight_semantic = xs / (xs + xt);
  out.weight_theme = xt / (xs + xt);
  out.semantic = es;
  out.theme = et;
  out.dual = out.weight_semantic * es + out.weight_theme * et;
  if (cache != nullptr) {
    cache->es = es;
    cache->et = et;
    cache->ts = std::move(ts);
    cache->tt = std::move(tt);
    cache->ws = out.weight_semantic;
    cache->wt = out.weight_theme;
  }
  return out;
}

std::pair<Vector, Vector> MultiViewCombiner::backward(const Cache& cache, const Vector& d_dual) {
  Vector d_es = cache.ws * d_dual;
  Vector d_et = cache.wt * d_dual;
  const double gs = d_dual.dot(cache.es);
  const double gt = d_dual.dot(cache.et);
  const double mean = cache.ws * gs + cache.wt * gt;
  const double d_as = cache.ws * (gs - mean);
  const double d_at = cache.wt * (gt - mean);

  q1.grad.col(0) += d_as * cache.ts;
  const Vector dus = (d_as * q1.value.col(0)).cwiseProduct((1.0 - cache.ts.array().square()).matrix());
  w1.grad += dus * cache.es.transpose();
  b1.grad.col(0) += dus;
  d_es += w1.value.transpose() * dus;

  q2.grad.col(0) += d_at * cache.tt;
  const Vector dut = (d_at * q2.value.col(0)).cwiseProduct((1.0 - cache.tt.array().square()).matrix());
  w2.grad += dut * cache.et.transpose();
  b2.grad.col(0) += dut;
  d_et += w2.value.transpose() * dut;
  return {d_es, d_et};
}

}  // namespace gnr::nn
