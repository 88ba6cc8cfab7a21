#pragma once

#include "gnr/nn.hpp"

#include <string>
#include <vector>

namespace gnr::nn {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Applies one update per step() to a fixed, ordered parameter list.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const ParamRefs& params);
  void step(const ParamRefs& params);

 private:
  OptimizerConfig config_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

}  // namespace gnr::nn
