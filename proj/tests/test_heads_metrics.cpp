#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "allspark/gradcheck.hpp"
#include "allspark/heads.hpp"
#include "allspark/metrics.hpp"
#include "allspark/ops.hpp"

using namespace allspark;

namespace {

TensorPtr random_hidden(std::size_t n, std::size_t d, Rng& rng, Dtype dt = Dtype::F64) {
  auto t = Tensor::make({n, d}, dt, false);
  for (auto& v : t->data) v = rng.normal(0.0, 1.0);
  t->quantize();
  return t;
}

}  // namespace

TEST_CASE("zero classifier head gives uniform logits and argmax class 0") {
  HeadSpec spec;
  spec.kind = HeadKind::Classify;
  spec.num_classes = 5;
  ParamStore store;
  Rng rng(1);
  init_head_params(store, spec, 16, Dtype::F64, rng);
  init_zeros(*store.get("head.w"));
  init_zeros(*store.get("head.b"));
  Rng drng(2);
  auto logits = head_forward(store, spec, random_hidden(6, 16, drng), 4);
  for (double v : logits->data) CHECK(v == 0.0);
  CHECK(argmax_row(*logits) == 0);
}

TEST_CASE("regress head applies the fixed unscale") {
  HeadSpec spec;
  spec.kind = HeadKind::Regress;
  spec.target_mean = 18.04;
  spec.target_std = 1.0;
  ParamStore store;
  Rng rng(3);
  init_head_params(store, spec, 8, Dtype::F64, rng);
  init_zeros(*store.get("head.w"));  // z is forced to 0
  init_zeros(*store.get("head.b"));
  Rng drng(4);
  auto y = head_forward(store, spec, random_hidden(3, 8, drng), 2);
  CHECK(y->data[0] == doctest::Approx(18.04).epsilon(1e-12));
}

TEST_CASE("classifier head grad_check through pooling passes at 1e-6") {
  HeadSpec spec;
  spec.kind = HeadKind::Classify;
  spec.num_classes = 4;
  spec.pooling = Pooling::MeanOverModal;
  ParamStore store;
  Rng rng(5);
  init_head_params(store, spec, 12, Dtype::F64, rng);
  Rng drng(6);
  auto hidden = random_hidden(7, 12, drng);
  std::vector<std::size_t> label{2};
  auto forward = [&] { return cross_entropy_rows(head_forward(store, spec, hidden, 5), label); };
  auto report = grad_check(forward, store.trainable(), 30, 1e-4, 1e-6, 9);
  CHECK_MESSAGE(report.passed, "max_rel_err=", report.max_rel_err);
}

TEST_CASE("argmax is invariant under adding a constant to all logits") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto logits = Tensor::make({1, 6}, Dtype::F64, false);
    for (auto& v : logits->data) v = rng.normal(0.0, 2.0);
    auto shifted = Tensor::make({1, 6}, Dtype::F64, false);
    const double c = rng.normal(0.0, 10.0);
    for (std::size_t j = 0; j < 6; ++j) shifted->data[j] = logits->data[j] + c;
    CHECK(argmax_row(*logits) == argmax_row(*shifted));
  }
}

TEST_CASE("regress head is affine in the pooled hidden vector") {
  HeadSpec spec;
  spec.kind = HeadKind::Regress;
  spec.target_mean = 3.0;
  spec.target_std = 2.5;
  ParamStore store;
  Rng rng(8);
  init_head_params(store, spec, 6, Dtype::F64, rng);
  // probe affinity: f(a) + f(b) - f(0) == f(a + b)
  auto probe = [&](const std::vector<double>& v) {
    auto h = Tensor::make({1, 6}, Dtype::F64, false);
    h->data = v;
    return head_forward(store, spec, h, 1)->data[0];
  };
  Rng drng(9);
  std::vector<double> a(6), b(6), ab(6), zero(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    a[i] = drng.normal(0.0, 1.0);
    b[i] = drng.normal(0.0, 1.0);
    ab[i] = a[i] + b[i];
  }
  CHECK(probe(a) + probe(b) - probe(zero) == doctest::Approx(probe(ab)).epsilon(1e-12));
}

TEST_CASE("depth head reshapes to the configured grid") {
  HeadSpec spec;
  spec.kind = HeadKind::DepthRegress;
  spec.out_h = 4;
  spec.out_w = 3;
  ParamStore store;
  Rng rng(10);
  init_head_params(store, spec, 8, Dtype::F64, rng);
  Rng drng(11);
  auto y = head_forward(store, spec, random_hidden(5, 8, drng), 5);
  CHECK(y->dims == std::vector<std::size_t>{4, 3});
}

TEST_CASE("head spec validation") {
  HeadSpec bad;
  bad.kind = HeadKind::Classify;
  bad.num_classes = 1;
  CHECK_THROWS_AS(validate_head_spec(bad), ContractError);
  HeadSpec badstd;
  badstd.kind = HeadKind::Regress;
  badstd.target_std = 0.0;
  CHECK_THROWS_AS(validate_head_spec(badstd), ContractError);
}

// ---------------------------------------------------------------- metrics

TEST_CASE("ade/fde of identical trajectories is zero") {
  auto p = Tensor::from({3, 2}, {0, 0, 1, 1, 2, 2}, Dtype::F64);
  auto m = metric_ade_fde(*p, *p);
  CHECK(m.ade == 0.0);
  CHECK(m.fde == 0.0);
}

TEST_CASE("ade/fde hand example: unit offset") {
  auto gt = Tensor::from({2, 2}, {0, 0, 1, 0}, Dtype::F64);
  auto pred = Tensor::from({2, 2}, {0, 1, 1, 1}, Dtype::F64);
  auto m = metric_ade_fde(*pred, *gt);
  CHECK(m.ade == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.fde == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ade/fde matches the brute-force oracle on random 12-point pairs") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto pred = Tensor::make({12, 2}, Dtype::F64, false);
    auto gt = Tensor::make({12, 2}, Dtype::F64, false);
    for (auto& v : pred->data) v = rng.normal(0.0, 3.0);
    for (auto& v : gt->data) v = rng.normal(0.0, 3.0);
    double sum = 0.0, last = 0.0;
    for (int t = 0; t < 12; ++t) {
      last = std::hypot(pred->data[t * 2] - gt->data[t * 2], pred->data[t * 2 + 1] - gt->data[t * 2 + 1]);
      sum += last;
    }
    auto m = metric_ade_fde(*pred, *gt);
    CHECK(std::abs(m.ade - sum / 12.0) < 1e-12);
    CHECK(std::abs(m.fde - last) < 1e-12);
  }
  auto a = Tensor::make({3, 2}, Dtype::F64, false);
  auto b = Tensor::make({4, 2}, Dtype::F64, false);
  CHECK_THROWS_AS(metric_ade_fde(*a, *b), ShapeError);
}

TEST_CASE("pag formula") {
  CHECK(metric_pag({0, 0, 0}, 6) == 100.0);
  CHECK(metric_pag({0.1, 0.59, 0.61, 2.0, -0.3, 0.0, 1.7, 0.65, 0.9, -0.55}, 6) == 50.0);
  // counting oracle on random errors
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> errs;
    for (int i = 0; i < 37; ++i) errs.push_back(rng.normal(0.0, 1.0));
    for (unsigned code : {6u, 10u}) {
      std::size_t count = 0;
      for (double e : errs) {
        if (std::abs(e) <= code / 10.0) ++count;
      }
      CHECK(metric_pag(errs, code) == 100.0 * count / 37.0);
    }
  }
  CHECK_THROWS_AS(metric_pag({}, 6), ContractError);
}

TEST_CASE("classification metrics on a diagonal confusion matrix") {
  std::vector<std::size_t> labels{0, 1, 2, 3, 0, 1};
  auto m = metric_classification(labels, labels, 4);
  CHECK(m.oa == 1.0);
  CHECK(m.aa == 1.0);
  CHECK(m.kappa == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-zero predictions on balanced binary labels") {
  std::vector<std::size_t> labels{0, 0, 1, 1};
  std::vector<std::size_t> preds{0, 0, 0, 0};
  auto m = metric_classification(preds, labels, 2);
  CHECK(m.oa == 0.5);
  CHECK(m.aa == 0.5);
  CHECK(m.kappa == 0.0);
}

TEST_CASE("classification metrics match an independent confusion oracle") {
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    const std::size_t n = 5 + rng.below(60);
    std::vector<std::size_t> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.below(k);
      preds[i] = rng.below(k);
    }
    // independent oracle
    std::vector<std::vector<double>> cm(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) cm[labels[i]][preds[i]] += 1.0;
    double diag = 0.0;
    for (std::size_t c = 0; c < k; ++c) diag += cm[c][c];
    const double oa = diag / n;
    double aa = 0.0;
    std::size_t nonempty = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double row = std::accumulate(cm[c].begin(), cm[c].end(), 0.0);
      if (row > 0) {
        aa += cm[c][c] / row;
        ++nonempty;
      }
    }
    aa /= nonempty;
    double pe = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double row = std::accumulate(cm[c].begin(), cm[c].end(), 0.0);
      double col = 0.0;
      for (std::size_t r = 0; r < k; ++r) col += cm[r][c];
      pe += (row / n) * (col / n);
    }
    const double kappa = pe >= 1.0 ? 0.0 : (oa - pe) / (1.0 - pe);

    auto m = metric_classification(preds, labels, k);
    CHECK(std::abs(m.oa - oa) < 1e-12);
    CHECK(std::abs(m.aa - aa) < 1e-12);
    CHECK(std::abs(m.kappa - kappa) < 1e-12);
    CHECK(m.oa >= 0.0);
    CHECK(m.oa <= 1.0);
    CHECK(m.kappa >= -1.0);
    CHECK(m.kappa <= 1.0);
  }
}

TEST_CASE("degenerate single-class agreement defines kappa = 0") {
  std::vector<std::size_t> labels{1, 1, 1};
  std::vector<std::size_t> preds{1, 1, 1};
  auto m = metric_classification(preds, labels, 2);
  CHECK(m.oa == 1.0);
  CHECK(m.kappa == 0.0);
}

TEST_CASE("regression metrics basics and errors") {
  std::vector<double> t{1.0, 2.0, 3.0};
  auto m = metric_regression(t, t);
  CHECK(m.rmse == 0.0);
  CHECK(m.mae == 0.0);
  CHECK(m.r2 == 1.0);
  CHECK_THROWS_AS(metric_regression({1.0, 2.0}, {5.0, 5.0}), ContractError);  // zero variance
}

TEST_CASE("regression metrics match a brute-force oracle") {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(40);
    std::vector<double> preds(n), targets(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.normal(0.0, 2.0);
      targets[i] = rng.normal(1.0, 3.0);
    }
    double se = 0.0, ae = 0.0, mean = 0.0;
    for (double v : targets) mean += v;
    mean /= n;
    double tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      se += (preds[i] - targets[i]) * (preds[i] - targets[i]);
      ae += std::abs(preds[i] - targets[i]);
      tot += (targets[i] - mean) * (targets[i] - mean);
    }
    auto m = metric_regression(preds, targets);
    CHECK(std::abs(m.rmse - std::sqrt(se / n)) < 1e-12);
    CHECK(std::abs(m.mae - ae / n) < 1e-12);
    CHECK(std::abs(m.r2 - (1.0 - se / tot)) < 1e-12);
  }
}

TEST_CASE("mrr examples") {
  CHECK(metric_mrr({1, 1, 1}) == 1.0);
  CHECK(metric_mrr({1, 2, 4}) == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(metric_mrr({}), ContractError);
  CHECK_THROWS_AS(metric_mrr({0}), ContractError);
  // harmonic oracle on random ranks
  Rng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> ranks;
    double acc = 0.0;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      ranks.push_back(1 + rng.below(20));
      acc += 1.0 / ranks.back();
    }
    const double got = metric_mrr(ranks);
    CHECK(std::abs(got - acc / n) < 1e-12);
    CHECK(got > 0.0);
    CHECK(got <= 1.0);
  }
}
