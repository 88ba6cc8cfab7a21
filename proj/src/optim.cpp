#include "gnr/optim.hpp"

#include <cmath>

namespace gnr::nn {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerConfig config, const ParamRefs& params) : config_(config) {
  if (!(config_.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (config_.kind == OptimizerKind::kAdam) {
    for (auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
}

void Optimizer::step(const ParamRefs& params) {
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (auto* p : params) p->value -= lr * p->grad;
    return;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p->grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace gnr::nn
