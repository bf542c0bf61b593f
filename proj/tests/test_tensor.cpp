#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "allspark/gradcheck.hpp"
#include "allspark/ops.hpp"
#include "allspark/stt1.hpp"

using namespace allspark;

namespace {

// Independent triple-loop product, kept free of the library's matmul path.
std::vector<double> matmul_oracle(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

TensorPtr random_tensor(std::vector<std::size_t> dims, Rng& rng, Dtype dt = Dtype::F64, bool rg = false,
                        double s = 1.0) {
  auto t = Tensor::make(std::move(dims), dt, rg);
  for (auto& v : t->data) v = rng.normal(0.0, s);
  t->quantize();
  return t;
}

}  // namespace

TEST_CASE("matmul identity") {
  auto I = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto out = matmul(I, I);
  CHECK(out->dims == std::vector<std::size_t>{2, 2});
  CHECK(out->data == std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("matmul annihilates on zero") {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto z = Tensor::from({2, 1}, {0, 0});
  auto out = matmul(a, z);
  CHECK(out->dims == std::vector<std::size_t>{2, 1});
  CHECK(out->data == std::vector<double>{0, 0});
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(42);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto out = matmul(a, b);
  auto expect = matmul_oracle(a->data, b->data, 3, 4, 2);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(out->data[i] - expect[i]) < 1e-6);
}

TEST_CASE("matmul rejects mismatched inner dims with both dim lists") {
  auto a = Tensor::make({2, 3});
  auto b = Tensor::make({4, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("softmax of a zero row is uniform") {
  auto x = Tensor::make({1, 4});
  auto y = softmax_rows(x);
  for (double v : y->data) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("softmax is stabilized against overflow") {
  auto x = Tensor::from({1, 2}, {1000.0, 0.0}, Dtype::F64);
  auto y = softmax_rows(x);
  CHECK(y->all_finite());
  CHECK(y->data[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y->data[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax matches exp-normalize oracle") {
  Rng rng(7);
  auto x = random_tensor({2, 3}, rng);
  auto y = softmax_rows(x);
  for (std::size_t i = 0; i < 2; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < 3; ++j) denom += std::exp(x->data[i * 3 + j]);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(y->data[i * 3 + j] - std::exp(x->data[i * 3 + j]) / denom) < 1e-6);
  }
}

TEST_CASE("softmax rejects NaN input") {
  auto x = Tensor::from({1, 2}, {0.0, 0.0}, Dtype::F64);
  x->data[1] = std::nan("");
  CHECK_THROWS_AS(softmax_rows(x), NumericError);
}

TEST_CASE("softmax row sums stay within 1e-6 up to 64x64") {
  Rng rng(11);
  for (std::size_t m : {1u, 5u, 64u}) {
    for (std::size_t n : {1u, 3u, 64u}) {
      auto x = random_tensor({m, n}, rng, Dtype::F32, false, 10.0);
      auto y = softmax_rows(x);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += y->data[i * n + j];
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("linear with identity weights is the identity") {
  Rng rng(3);
  auto x = random_tensor({3, 4}, rng);
  auto W = Tensor::from({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}, Dtype::F64);
  auto b = Tensor::make({4}, Dtype::F64);
  auto y = linear(x, W, b);
  CHECK(y->data == x->data);
}

TEST_CASE("layer_norm maps a constant row to zeros pre-affine") {
  auto x = Tensor::from({1, 5}, {3.5, 3.5, 3.5, 3.5, 3.5}, Dtype::F64);
  auto y = layer_norm(x);
  for (double v : y->data) CHECK(v == 0.0);
}

TEST_CASE("conv1d matches a sliding-window oracle") {
  auto x = Tensor::from({1, 5}, {1, 2, 3, 4, 5}, Dtype::F64);
  const double third = 1.0 / 3.0;
  auto k = Tensor::from({1, 1, 3}, {third, third, third}, Dtype::F64);
  auto y = conv1d(x, k, nullptr, 1, 0);
  CHECK(y->dims == std::vector<std::size_t>{1, 3});
  // independent sliding window
  for (std::size_t i = 0; i < 3; ++i) {
    double expect = (x->data[i] + x->data[i + 1] + x->data[i + 2]) / 3.0;
    CHECK(y->data[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("embedding lookup rejects out-of-vocabulary ids") {
  auto table = Tensor::make({10, 4});
  CHECK_THROWS_AS(embedding_lookup(table, {3, 10}), ContractError);
}

TEST_CASE("backward of sum gives all-ones gradient") {
  auto x = Tensor::make({2, 2}, Dtype::F64, true);
  x->data = {1, 2, 3, 4};
  auto loss = sum_all(x);
  backward(loss);
  CHECK(x->grad == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("backward of half squared sum reproduces x") {
  Rng rng(5);
  auto x = random_tensor({3, 3}, rng, Dtype::F64, true);
  auto loss = scale(sum_all(mul(x, x)), 0.5);
  backward(loss);
  for (std::size_t i = 0; i < x->numel(); ++i) CHECK(x->grad[i] == doctest::Approx(x->data[i]).epsilon(1e-12));
}

TEST_CASE("gradients accumulate until explicitly zeroed") {
  auto x = Tensor::make({2}, Dtype::F64, true);
  x->data = {1.0, 2.0};
  backward(sum_all(x));
  backward(sum_all(x));
  CHECK(x->grad == std::vector<double>{2, 2});
  x->zero_grad();
  backward(sum_all(x));
  CHECK(x->grad == std::vector<double>{1, 1});
}

TEST_CASE("disconnected tensors keep zero gradient without error") {
  auto x = Tensor::make({2}, Dtype::F64, true);
  auto y = Tensor::make({2}, Dtype::F64, true);
  y->data = {1.0, 1.0};
  backward(sum_all(y));
  CHECK(x->grad == std::vector<double>{0, 0});
}

TEST_CASE("backward rejects a non-scalar loss") {
  auto x = Tensor::make({2, 2}, Dtype::F64, true);
  auto y = add(x, x);
  CHECK_THROWS_AS(backward(y), ContractError);
}

TEST_CASE("two-layer MLP gradients match central finite differences") {
  Rng rng(1234);
  auto x = random_tensor({2, 4}, rng);
  auto W1 = random_tensor({8, 4}, rng, Dtype::F64, true, 0.5);
  auto b1 = random_tensor({8}, rng, Dtype::F64, true, 0.1);
  auto W2 = random_tensor({3, 8}, rng, Dtype::F64, true, 0.5);
  auto b2 = random_tensor({3}, rng, Dtype::F64, true, 0.1);
  auto target = random_tensor({2, 3}, rng);

  auto forward = [&] { return mse(linear(gelu(linear(x, W1, b1)), W2, b2), target); };
  auto report = grad_check(
      forward, {{"W1", W1}, {"b1", b1}, {"W2", W2}, {"b2", b2}}, 64, 1e-4, 1e-6, 99);
  CHECK(report.passed);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("grad_check is exact for a pure linear model") {
  Rng rng(8);
  auto x = random_tensor({4, 6}, rng);
  auto W = random_tensor({2, 6}, rng, Dtype::F64, true);
  auto b = random_tensor({2}, rng, Dtype::F64, true);
  auto forward = [&] { return mean_all(linear(x, W, b)); };
  auto report = grad_check(forward, {{"W", W}, {"b", b}}, 14, 1e-4, 1e-10, 5);
  CHECK(report.passed);
  CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("grad_check passes a softmax cross-entropy head at 1e-6") {
  Rng rng(21);
  auto x = random_tensor({4, 8}, rng);
  auto W = random_tensor({5, 8}, rng, Dtype::F64, true, 0.3);
  auto b = random_tensor({5}, rng, Dtype::F64, true, 0.1);
  std::vector<std::size_t> labels{0, 3, 2, 4};
  auto forward = [&] { return cross_entropy_rows(linear(x, W, b), labels); };
  auto report = grad_check(forward, {{"W", W}, {"b", b}}, 45, 1e-4, 1e-6, 77);
  CHECK(report.passed);
}

TEST_CASE("grad_check detects a non-deterministic forward") {
  auto W = Tensor::make({2, 2}, Dtype::F64, true);
  int calls = 0;
  auto forward = [&] {
    ++calls;
    auto x = Tensor::scalar(static_cast<double>(calls), Dtype::F64);
    return add(x, sum_all(W));
  };
  CHECK_THROWS_AS(grad_check(forward, {{"W", W}}, 4, 1e-4, 1e-6), ContractError);
}

TEST_CASE("per-primitive gradients agree with finite differences") {
  Rng rng(314);
  auto p = random_tensor({3, 4}, rng, Dtype::F64, true, 0.8);

  SUBCASE("matmul") {
    auto c = random_tensor({4, 3}, rng);
    auto fwd = [&] { return mean_all(matmul(p, c)); };
    CHECK(grad_check(fwd, {{"p", p}}, 12, 1e-4, 1e-6).passed);
  }
  SUBCASE("softmax") {
    auto fwd = [&] { return mean_all(mul(softmax_rows(p), p)); };
    CHECK(grad_check(fwd, {{"p", p}}, 12, 1e-4, 1e-6).passed);
  }
  SUBCASE("layer_norm") {
    auto gamma = random_tensor({4}, rng, Dtype::F64, true);
    auto beta = random_tensor({4}, rng, Dtype::F64, true);
    auto fwd = [&] { return mean_all(mul(layer_norm(p, gamma, beta), p)); };
    CHECK(grad_check(fwd, {{"p", p}, {"gamma", gamma}, {"beta", beta}}, 20, 1e-4, 1e-6).passed);
  }
  SUBCASE("gelu") {
    auto fwd = [&] { return mean_all(gelu(p)); };
    CHECK(grad_check(fwd, {{"p", p}}, 12, 1e-4, 1e-4).passed);
  }
  SUBCASE("conv2d") {
    auto img = random_tensor({2, 5, 5}, rng);
    auto kern = random_tensor({3, 2, 3, 3}, rng, Dtype::F64, true, 0.4);
    auto bias = random_tensor({3}, rng, Dtype::F64, true, 0.1);
    auto fwd = [&] { return mean_all(conv2d(img, kern, bias, 2, 1)); };
    CHECK(grad_check(fwd, {{"kern", kern}, {"bias", bias}}, 20, 1e-4, 1e-6).passed);
  }
  SUBCASE("conv1d") {
    auto sig = random_tensor({2, 7}, rng);
    auto kern = random_tensor({4, 2, 3}, rng, Dtype::F64, true, 0.4);
    auto fwd = [&] { return mean_all(conv1d(sig, kern, nullptr, 1, 1)); };
    CHECK(grad_check(fwd, {{"kern", kern}}, 16, 1e-4, 1e-6).passed);
  }
  SUBCASE("mean_pool and concat and slices") {
    auto q = random_tensor({2, 4}, rng, Dtype::F64, true);
    auto fwd = [&] {
      auto joined = concat({p, q}, 0);
      auto pooled = mean_pool(slice_rows(joined, 1, 3), 0);
      return mean_all(mul(pooled, pooled));
    };
    CHECK(grad_check(fwd, {{"p", p}, {"q", q}}, 16, 1e-4, 1e-6).passed);
  }
  SUBCASE("embedding") {
    auto table = random_tensor({6, 4}, rng, Dtype::F64, true);
    std::vector<std::size_t> ids{1, 5, 1};
    auto fwd = [&] { return mean_all(mul(embedding_lookup(table, ids), embedding_lookup(table, ids))); };
    CHECK(grad_check(fwd, {{"table", table}}, 16, 1e-4, 1e-6).passed);
  }
  SUBCASE("causal softmax") {
    auto s = random_tensor({4, 4}, rng, Dtype::F64, true);
    auto fwd = [&] { return mean_all(mul(softmax_rows_causal(s), s)); };
    CHECK(grad_check(fwd, {{"s", s}}, 16, 1e-4, 1e-6).passed);
  }
}

TEST_CASE("finite inputs propagate to finite outputs") {
  Rng rng(99);
  auto x = random_tensor({4, 6}, rng, Dtype::F32, false, 1e3);
  CHECK(softmax_rows(x)->all_finite());
  CHECK(gelu(x)->all_finite());
  CHECK(layer_norm(x)->all_finite());
  auto W = random_tensor({6, 6}, rng, Dtype::F32, false, 1e3);
  CHECK(matmul(x, W)->all_finite());
  CHECK(mean_pool(x, 0)->all_finite());
}

TEST_CASE("seeded construction is bitwise deterministic") {
  auto build = [] {
    Rng rng(2024);
    auto a = random_tensor({8, 8}, rng, Dtype::F32);
    auto b = random_tensor({8, 8}, rng, Dtype::F32);
    return softmax_rows(matmul(gelu(a), b));
  };
  auto r1 = build();
  auto r2 = build();
  CHECK(r1->data == r2->data);
}

TEST_CASE("f32 mode stores float-representable values") {
  auto t = Tensor::from({1, 2}, {0.1, 1.0 / 3.0}, Dtype::F32);
  for (double v : t->data) CHECK(v == static_cast<double>(static_cast<float>(v)));
}

TEST_CASE("stt1 roundtrip is bit-exact") {
  Rng rng(55);
  auto t = random_tensor({3, 2, 4}, rng, Dtype::F32);
  auto bytes = stt1_encode(*t);
  auto back = stt1_decode(bytes);
  CHECK(back->dims == t->dims);
  CHECK(back->data == t->data);
  CHECK(back->dtype == Dtype::F32);
  // and again through a file
  auto path = std::filesystem::temp_directory_path() / "allspark_stt1_test.stt1";
  stt1_write(path.string(), *t);
  auto again = stt1_read(path.string());
  CHECK(again->data == t->data);
  std::filesystem::remove(path);
}

TEST_CASE("stt1 header layout is pinned") {
  auto t = Tensor::from({2, 3}, {0, 0, 0, 0, 0, 0}, Dtype::F32);
  auto bytes = stt1_encode(*t);
  REQUIRE(bytes.size() == 4 + 1 + 1 + 8 + 24);
  CHECK(bytes.substr(0, 4) == "STT1");
  CHECK(bytes[4] == '\x00');  // f32
  CHECK(bytes[5] == '\x02');  // rank 2
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  CHECK(p[6] == 2);
  CHECK(p[7] == 0);
  CHECK(p[10] == 3);
}

TEST_CASE("stt1 rejects corrupted payloads") {
  auto t = Tensor::from({2, 2}, {1, 2, 3, 4}, Dtype::F32);
  auto bytes = stt1_encode(*t);
  CHECK_THROWS_AS(stt1_decode(bytes.substr(0, bytes.size() - 1)), IoError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(stt1_decode(bad), IoError);
}

TEST_CASE("f64 tensors roundtrip through stt1 dtype code 1") {
  Rng rng(66);
  auto t = random_tensor({5}, rng, Dtype::F64);
  auto bytes = stt1_encode(*t);
  CHECK(bytes[4] == '\x01');
  auto back = stt1_decode(bytes);
  CHECK(back->dtype == Dtype::F64);
  CHECK(back->data == t->data);
}
