#include "gnr/grad_check.hpp"

#include "gnr/rng.hpp"

#include <algorithm>
#include <cmath>

namespace gnr::textenc {

GradCheckReport grad_check(const std::string& loss_name, const LossFn& loss, const nn::ParamRefs& params,
                           const GradCheckOptions& options) {
  nn::zero_grad(params);
  const double base = loss(true);
  if (!std::isfinite(base)) throw Error("grad_check(" + loss_name + "): non-finite loss at the base point");

  GradCheckReport report;
  report.loss_name = loss_name;
  Rng rng(options.seed);
  for (auto* p : params) {
    TensorCheck tc;
    tc.name = p->name;
    const auto size = static_cast<std::size_t>(p->value.size());
    if (size == 0) continue;
    for (std::size_t k = 0; k < options.probes_per_tensor; ++k) {
      const auto flat = static_cast<Eigen::Index>(rng.below(size));
      double& coord = p->value.data()[flat];
      const double saved = coord;
      coord = saved + options.epsilon;
      const double up = loss(false);
      coord = saved - options.epsilon;
      const double down = loss(false);
      coord = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error("grad_check(" + loss_name + "): non-finite loss probing " + p->name);
      }
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = p->grad.data()[flat];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
      tc.max_rel_error = std::max(tc.max_rel_error, std::abs(analytic - numeric) / denom);
      ++tc.probes;
    }
    report.total_probes += tc.probes;
    report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
    report.tensors.push_back(std::move(tc));
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace gnr::textenc
