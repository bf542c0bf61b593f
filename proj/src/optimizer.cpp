#include "allspark/optimizer.hpp"

#include <cmath>

namespace allspark {

void AdamW::step(const std::vector<std::pair<std::string, TensorPtr>>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, p] : params) {
    if (!p->requires_grad) throw ContractError("optimizer: frozen parameter " + name + " passed in");
    p->ensure_grad();
    for (double g : p->grad) {
      if (!std::isfinite(g)) throw NumericError("optimizer: non-finite gradient in parameter group " + name);
    }
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p->numel(), 0.0);
      v.assign(p->numel(), 0.0);
    }
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double g = p->grad[i];
      if (cfg_.weight_decay != 0.0) p->data[i] *= 1.0 - lr * cfg_.weight_decay;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p->data[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p->quantize();
  }
}

double clip_global_norm(const std::vector<std::pair<std::string, TensorPtr>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    for (double g : p->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& [name, p] : params) {
      for (double& g : p->grad) g *= s;
    }
  }
  return norm;
}

}  // namespace allspark
