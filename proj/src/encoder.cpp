#include "gnr/encoder.hpp"

namespace gnr::textenc {

TextEncoder::TextEncoder(const std::string& name, std::size_t vocab_size, int dim, int heads)
    : embedding(name + ".embedding", static_cast<Eigen::Index>(vocab_size), dim),
      attention(name + ".attention", dim, heads, false),
      pooling(name + ".pooling", dim, dim) {}

Vector TextEncoder::encode(const TokenSeq& tokens, Cache* cache) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (int t : tokens) {
    if (t == kPad) continue;
    if (t < 0 || static_cast<Eigen::Index>(t) >= embedding.table.value.rows()) {
      throw ShapeError("token index " + std::to_string(t) + " outside the embedding table");
    }
    ids.push_back(t);
  }
  if (cache != nullptr) cache->ids = ids;
  if (ids.empty()) return Vector::Zero(dim());
  const Matrix x = embedding.forward(ids);
  const Matrix h = attention.forward(x, cache ? &cache->attention : nullptr);
  return pooling.forward(h, cache ? &cache->pooling : nullptr);
}

void TextEncoder::backward(const Cache& cache, const Vector& d_out) {
  if (cache.ids.empty()) return;
  const Matrix dh = pooling.backward(cache.pooling, d_out);
  const Matrix dx = attention.backward(cache.attention, dh);
  embedding.backward(cache.ids, dx);
}

nn::ParamRefs TextEncoder::params() {
  nn::ParamRefs out = embedding.params();
  for (auto* p : attention.params()) out.push_back(p);
  for (auto* p : pooling.params()) out.push_back(p);
  return out;
}

UserEncoder::UserEncoder(const std::string& name, int dim) : pooling(name + ".pooling", dim, dim) {}

Vector UserEncoder::encode(const std::vector<Vector>& items, Cache* cache) const {
  if (items.empty()) throw DataError("encode_user: empty history");
  Matrix h(static_cast<Eigen::Index>(items.size()), items.front().size());
  for (std::size_t i = 0; i < items.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = items[i].transpose();
  return pooling.forward(h, cache);
}

std::vector<Vector> UserEncoder::backward(const Cache& cache, const Vector& d_out) {
  const Matrix dh = pooling.backward(cache, d_out);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(dh.rows()));
  for (Eigen::Index i = 0; i < dh.rows(); ++i) out.emplace_back(dh.row(i).transpose());
  return out;
}

Vector encode_text(const TokenSeq& tokens, const TextEncoder& encoder) { return encoder.encode(tokens); }

DualEmbedding combine_dual(const Vector& semantic, const Vector& theme, const nn::MultiViewCombiner& combiner) {
  if (semantic.size() != theme.size()) throw ShapeError("combine_dual: semantic and theme dimensions differ");
  return combiner.forward(semantic, theme, nullptr);
}

Vector encode_user(const std::vector<DualEmbedding>& history, const UserEncoder& encoder) {
  std::vector<Vector> items;
  items.reserve(history.size());
  for (const auto& h : history) items.push_back(h.dual);
  return encoder.encode(items);
}

}  // namespace gnr::textenc
