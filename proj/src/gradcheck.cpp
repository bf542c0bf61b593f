#include "allspark/gradcheck.hpp"

#include <cmath>

namespace allspark {

namespace {

double eval_scalar(const std::function<TensorPtr()>& forward) {
  NoGradGuard off;
  auto out = forward();
  if (!out || !out->is_scalar()) throw ContractError("grad_check: forward must return a scalar");
  return out->data[0];
}

}  // namespace

GradCheckReport grad_check(const std::function<TensorPtr()>& forward,
                           const std::vector<std::pair<std::string, TensorPtr>>& params, std::size_t samples,
                           double epsilon, double tolerance, std::uint64_t seed) {
  if (params.empty()) throw ContractError("grad_check: no parameters given");
  if (epsilon <= 0.0) throw ContractError("grad_check: epsilon must be positive");

  const double base0 = eval_scalar(forward);
  const double base1 = eval_scalar(forward);
  if (base0 != base1) {
    throw ContractError("grad_check: forward is not deterministic (baselines differ)");
  }

  // one analytic pass
  for (auto& [name, p] : params) p->zero_grad();
  Tape::current().clear();
  auto loss = forward();
  if (!loss->is_scalar()) throw ContractError("grad_check: forward must return a scalar");
  backward(loss);

  std::size_t total_scalars = 0;
  for (auto& [name, p] : params) total_scalars += p->numel();
  if (total_scalars == 0) throw ContractError("grad_check: parameters are empty");

  Rng rng(seed);
  GradCheckReport report;
  report.tolerance = tolerance;
  report.epsilon = epsilon;
  for (std::size_t s = 0; s < samples; ++s) {
    // pick a scalar uniformly over the flattened parameter set
    std::size_t flat = static_cast<std::size_t>(rng.below(total_scalars));
    std::size_t pick = 0;
    while (flat >= params[pick].second->numel()) {
      flat -= params[pick].second->numel();
      ++pick;
    }
    auto& p = params[pick].second;
    const double analytic = p->requires_grad ? p->grad[flat] : 0.0;

    const double saved = p->data[flat];
    p->data[flat] = saved + epsilon;
    p->quantize();
    const double up = eval_scalar(forward);
    p->data[flat] = saved - epsilon;
    p->quantize();
    const double down = eval_scalar(forward);
    p->data[flat] = saved;
    p->quantize();

    const double numeric = (up - down) / (2.0 * epsilon);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1.0});
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = params[pick].first + "[" + std::to_string(flat) + "]";
    }
    ++report.checked;
  }
  report.passed = report.max_rel_err < tolerance;
  return report;
}

}  // namespace allspark
