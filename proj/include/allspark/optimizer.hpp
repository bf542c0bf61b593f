#pragma once

#include <map>

#include "allspark/tensor.hpp"

namespace allspark {

/// Adaptive moment optimizer with decoupled weight decay. The decay is
/// multiplicative and applied before the adaptive update. State holds first
/// and second moments per parameter plus the shared step count; frozen
/// parameters never enter it.
class AdamW {
public:
  struct Config {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW() = default;
  explicit AdamW(Config cfg) : cfg_(cfg) {}

  void step(const std::vector<std::pair<std::string, TensorPtr>>& params, double lr);

  std::size_t step_count() const { return t_; }
  bool has_state(const std::string& name) const { return m_.count(name) != 0; }
  const Config& config() const { return cfg_; }

private:
  Config cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

/// Scales gradients so their global L2 norm is at most max_norm;
/// returns the pre-clip norm.
double clip_global_norm(const std::vector<std::pair<std::string, TensorPtr>>& params, double max_norm);

}  // namespace allspark
