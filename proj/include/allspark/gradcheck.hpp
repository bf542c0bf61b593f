#pragma once

#include <functional>

#include "allspark/tensor.hpp"

namespace allspark {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool passed = false;
  double epsilon = 0.0;
  std::string worst_param;
};

/// Compares analytic gradients against central finite differences on
/// `samples` randomly chosen scalar parameters.
///
/// The forward closure must rebuild the loss from the current parameter
/// values on every call and be deterministic; two baseline evaluations are
/// compared and a mismatch raises ContractError. Relative error is
/// |a - n| / max(|a|, |n|, 1).
GradCheckReport grad_check(const std::function<TensorPtr()>& forward,
                           const std::vector<std::pair<std::string, TensorPtr>>& params, std::size_t samples,
                           double epsilon, double tolerance, std::uint64_t seed = 17);

}  // namespace allspark
