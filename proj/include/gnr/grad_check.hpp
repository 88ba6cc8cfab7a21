#pragma once

#include "gnr/nn.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gnr::textenc {

// Evaluates the loss; when `with_grad` is set it must also accumulate the
// analytic gradient into the parameters' grad buffers (zeroed by the caller).
using LossFn = std::function<double(bool with_grad)>;

struct GradCheckOptions {
  std::size_t probes_per_tensor = 20;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - f| / max(|a|, |f|, abs_floor).
  double abs_floor = 1e-6;
  std::uint64_t seed = 7;
};

struct TensorCheck {
  std::string name;
  std::size_t probes = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::string loss_name;
  std::vector<TensorCheck> tensors;
  std::size_t total_probes = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Compares the analytic gradient against central finite differences on
// randomly chosen coordinates of every tensor in `params`.
GradCheckReport grad_check(const std::string& loss_name, const LossFn& loss, const nn::ParamRefs& params,
                           const GradCheckOptions& options = {});

}  // namespace gnr::textenc
