#ifndef MCNN_GRADCHECK_HPP_
#define MCNN_GRADCHECK_HPP_

#include <optional>
#include <vector>

#include "mcnn/model.hpp"
#include "mcnn/tensor.hpp"

namespace mcnn {

struct GradcheckConfig {
  double epsilon = 1e-5;
  double tolerance = 1e-5;
  int seeds = 10;
  std::optional<Variant> only_variant;
};

// One (variant, seed) check: per-parameter results plus the overall verdict.
struct GradcheckRun {
  Variant variant = Variant::wd;
  std::uint64_t seed = 0;
  int attempts = 1;  // probe re-draws needed to land on a well-conditioned point
  std::vector<GradCheckResult> results;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Checks analytic gradients of the matching score against central finite
// differences on small double-precision models of every variant. Probe points
// sitting within 1e-3 of a ReLU or pooling kink are re-drawn, since the
// two-sided difference would straddle the non-differentiability.
std::vector<GradcheckRun> run_gradcheck(const GradcheckConfig& config);

// Reduced-dimension architecture used for the checks.
ArchitectureConfig gradcheck_architecture(Variant variant);

}  // namespace mcnn

#endif  // MCNN_GRADCHECK_HPP_
