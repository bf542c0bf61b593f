#pragma once

#include "allspark/tensor.hpp"

namespace allspark {

// Evaluation metrics, all computed in 64-bit regardless of model precision.

struct AdeFde {
  double ade = 0.0;
  double fde = 0.0;
};

/// Mean / final pointwise L2 distance between trajectories [T_pred x 2].
AdeFde metric_ade_fde(const Tensor& pred, const Tensor& gt);

/// Share of grid errors within a/10 metres, as a percentage.
double metric_pag(const std::vector<double>& errors_metres, unsigned threshold_code);

struct ClassificationMetrics {
  double top1 = 0.0;
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
};

/// OA is pooled accuracy, AA the unweighted mean of per-class recalls over
/// non-empty classes, kappa the chance-corrected agreement; a degenerate
/// p_e == 1 yields kappa = 0.
ClassificationMetrics metric_classification(const std::vector<std::size_t>& preds,
                                            const std::vector<std::size_t>& labels, std::size_t num_classes);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

RegressionMetrics metric_regression(const std::vector<double>& preds, const std::vector<double>& targets);

/// Mean reciprocal rank over 1-based ranks of the correct item.
double metric_mrr(const std::vector<std::size_t>& ranks);

}  // namespace allspark
