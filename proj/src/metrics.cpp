#include "allspark/metrics.hpp"

#include <cmath>

namespace allspark {

AdeFde metric_ade_fde(const Tensor& pred, const Tensor& gt) {
  if (pred.dims.size() != 2 || pred.dims[1] != 2 || gt.dims != pred.dims) {
    throw ShapeError("ade/fde: trajectories must both be [T x 2], got " + dims_str(pred.dims) + " vs " +
                     dims_str(gt.dims));
  }
  const std::size_t T = pred.dims[0];
  AdeFde out;
  double last = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double dx = pred.data[t * 2] - gt.data[t * 2];
    const double dy = pred.data[t * 2 + 1] - gt.data[t * 2 + 1];
    last = std::sqrt(dx * dx + dy * dy);
    out.ade += last;
  }
  out.ade /= static_cast<double>(T);
  out.fde = last;
  return out;
}

double metric_pag(const std::vector<double>& errors_metres, unsigned threshold_code) {
  if (errors_metres.empty()) throw ContractError("pag: empty error list");
  if (threshold_code == 0) throw ContractError("pag: threshold code must be positive");
  const double threshold = static_cast<double>(threshold_code) / 10.0;
  std::size_t within = 0;
  for (double e : errors_metres) {
    if (std::abs(e) <= threshold) ++within;
  }
  return 100.0 * static_cast<double>(within) / static_cast<double>(errors_metres.size());
}

ClassificationMetrics metric_classification(const std::vector<std::size_t>& preds,
                                            const std::vector<std::size_t>& labels, std::size_t num_classes) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw ContractError("classification metrics: prediction/label lengths differ or empty");
  }
  for (std::size_t v : labels) {
    if (v >= num_classes) throw ContractError("classification metrics: label out of range");
  }
  for (std::size_t v : preds) {
    if (v >= num_classes) throw ContractError("classification metrics: prediction out of range");
  }
  const std::size_t m = preds.size();
  std::vector<std::size_t> confusion(num_classes * num_classes, 0);  // [label][pred]
  for (std::size_t i = 0; i < m; ++i) ++confusion[labels[i] * num_classes + preds[i]];

  ClassificationMetrics out;
  std::size_t diag = 0;
  for (std::size_t c = 0; c < num_classes; ++c) diag += confusion[c * num_classes + c];
  out.oa = static_cast<double>(diag) / static_cast<double>(m);
  out.top1 = out.oa;

  double recall_sum = 0.0;
  std::size_t nonempty = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t support = 0;
    for (std::size_t j = 0; j < num_classes; ++j) support += confusion[c * num_classes + j];
    if (support == 0) continue;
    ++nonempty;
    recall_sum += static_cast<double>(confusion[c * num_classes + c]) / static_cast<double>(support);
  }
  out.aa = recall_sum / static_cast<double>(nonempty);

  double pe = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      row += confusion[c * num_classes + j];
      col += confusion[j * num_classes + c];
    }
    pe += (static_cast<double>(row) / m) * (static_cast<double>(col) / m);
  }
  out.kappa = pe >= 1.0 ? 0.0 : (out.oa - pe) / (1.0 - pe);
  return out;
}

RegressionMetrics metric_regression(const std::vector<double>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw ContractError("regression metrics: prediction/target lengths differ or empty");
  }
  const double n = static_cast<double>(preds.size());
  RegressionMetrics out;
  double mean_t = 0.0;
  for (double t : targets) mean_t += t;
  mean_t /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    out.mae += std::abs(d);
    ss_res += d * d;
    ss_tot += (targets[i] - mean_t) * (targets[i] - mean_t);
  }
  out.mae /= n;
  out.rmse = std::sqrt(ss_res / n);
  if (ss_tot == 0.0) throw ContractError("regression metrics: r2 undefined for zero target variance");
  out.r2 = 1.0 - ss_res / ss_tot;
  return out;
}

double metric_mrr(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) throw ContractError("mrr: empty rank list");
  double acc = 0.0;
  for (std::size_t r : ranks) {
    if (r == 0) throw ContractError("mrr: ranks are 1-based");
    acc += 1.0 / static_cast<double>(r);
  }
  return acc / static_cast<double>(ranks.size());
}

}  // namespace allspark
