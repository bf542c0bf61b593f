#include "allspark/ops.hpp"

#include <algorithm>
#include <cmath>

namespace allspark {

namespace {

constexpr double kLayerNormVarFloor = 1e-5;

void check_same_dtype(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->dtype != b->dtype) {
    throw ContractError(std::string(op) + ": dtype mismatch (" + dtype_name(a->dtype) + " vs " +
                        dtype_name(b->dtype) + ")");
  }
}

void check_2d(const TensorPtr& x, const char* op) {
  if (x->rank() != 2) throw ShapeError(std::string(op) + ": expected 2-d tensor, got " + dims_str(x->dims));
}

TensorPtr out_like(const std::vector<std::size_t>& dims, const TensorPtr& a) {
  return Tensor::make(dims, a->dtype, track_grad(a));
}

TensorPtr out_like(const std::vector<std::size_t>& dims, const TensorPtr& a, const TensorPtr& b) {
  return Tensor::make(dims, a->dtype, track_grad(a, b));
}

double stable_gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476));
}

double gelu_derivative(double x) {
  const double phi = std::exp(-0.5 * x * x) * 0.3989422804014327;  // standard normal pdf
  const double Phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
  return Phi + x * phi;
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check_same_dtype(a, b, "add");
  // scalar-with-tensor is the one permitted broadcast
  if (a->is_scalar() && !b->is_scalar()) return add(b, a);
  const bool scalar_rhs = b->is_scalar() && a->dims != b->dims;
  if (!scalar_rhs && a->dims != b->dims) {
    throw ShapeError("add: shape mismatch " + dims_str(a->dims) + " vs " + dims_str(b->dims));
  }
  auto out = out_like(a->dims, a, b);
  for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + (scalar_rhs ? b->data[0] : b->data[i]);
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([a, b, out, scalar_rhs] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        if (scalar_rhs) {
          for (std::size_t i = 0; i < out->numel(); ++i) b->grad[0] += out->grad[i];
        } else {
          for (std::size_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i];
        }
      }
    });
  }
  return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  return add(a, scale(b, -1.0));
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_dtype(a, b, "mul");
  if (a->is_scalar() && !b->is_scalar()) return mul(b, a);
  const bool scalar_rhs = b->is_scalar() && a->dims != b->dims;
  if (!scalar_rhs && a->dims != b->dims) {
    throw ShapeError("mul: shape mismatch " + dims_str(a->dims) + " vs " + dims_str(b->dims));
  }
  auto out = out_like(a->dims, a, b);
  for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * (scalar_rhs ? b->data[0] : b->data[i]);
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([a, b, out, scalar_rhs] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->numel(); ++i)
          a->grad[i] += out->grad[i] * (scalar_rhs ? b->data[0] : b->data[i]);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        if (scalar_rhs) {
          for (std::size_t i = 0; i < out->numel(); ++i) b->grad[0] += out->grad[i] * a->data[i];
        } else {
          for (std::size_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i] * a->data[i];
        }
      }
    });
  }
  return out;
}

TensorPtr scale(const TensorPtr& x, double c) {
  auto out = out_like(x->dims, x);
  for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] * c;
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, out, c] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i] * c;
    });
  }
  return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  check_same_dtype(a, b, "matmul");
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  const std::size_t m = a->dims[0], k = a->dims[1], k2 = b->dims[0], n = b->dims[1];
  if (k != k2) {
    throw ShapeError("matmul: inner dims differ, " + dims_str(a->dims) + " x " + dims_str(b->dims));
  }
  auto out = out_like({m, n}, a, b);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a->data[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out->data[i * n + j] += av * b->data[p * n + j];
    }
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([a, b, out, m, k, n] {
      if (a->requires_grad) {
        a->ensure_grad();
        // dA = dC . B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = out->grad[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) a->grad[i * k + p] += g * b->data[p * n + j];
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        // dB = A^T . dC
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a->data[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) b->grad[p * n + j] += av * out->grad[i * n + j];
          }
      }
    });
  }
  return out;
}

TensorPtr transpose(const TensorPtr& x) {
  check_2d(x, "transpose");
  const std::size_t m = x->dims[0], n = x->dims[1];
  auto out = out_like({n, m}, x);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->data[j * m + i] = x->data[i * n + j];
  if (out->requires_grad) {
    Tape::current().record([x, out, m, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) x->grad[i * n + j] += out->grad[j * m + i];
    });
  }
  return out;
}

TensorPtr gelu(const TensorPtr& x) {
  auto out = out_like(x->dims, x);
  for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = stable_gelu(x->data[i]);
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, out] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i] * gelu_derivative(x->data[i]);
    });
  }
  return out;
}

TensorPtr softmax_rows(const TensorPtr& x) {
  check_2d(x, "softmax_rows");
  for (double v : x->data) {
    if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite input");
  }
  const std::size_t m = x->dims[0], n = x->dims[1];
  auto out = out_like({m, n}, x);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = x->data[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x->data[i * n + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(x->data[i * n + j] - mx);
      out->data[i * n + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) out->data[i * n + j] /= sum;
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, out, m, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += out->grad[i * n + j] * out->data[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          x->grad[i * n + j] += out->data[i * n + j] * (out->grad[i * n + j] - dot);
      }
    });
  }
  return out;
}

TensorPtr softmax_rows_causal(const TensorPtr& x) {
  check_2d(x, "softmax_rows_causal");
  const std::size_t m = x->dims[0], n = x->dims[1];
  if (n < m) throw ShapeError("softmax_rows_causal: need cols >= rows, got " + dims_str(x->dims));
  std::vector<std::size_t> widths(m);
  for (std::size_t i = 0; i < m; ++i) widths[i] = i + 1;
  return softmax_rows_widths(x, widths);
}

TensorPtr softmax_rows_widths(const TensorPtr& x, const std::vector<std::size_t>& widths) {
  check_2d(x, "softmax_rows_widths");
  const std::size_t m = x->dims[0], n = x->dims[1];
  if (widths.size() != m) throw ShapeError("softmax_rows_widths: one width per row required");
  for (std::size_t w : widths) {
    if (w == 0 || w > n) throw ContractError("softmax_rows_widths: width outside [1, cols]");
  }
  auto out = out_like({m, n}, x);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t width = widths[i];
    double mx = x->data[i * n];
    for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, x->data[i * n + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double e = std::exp(x->data[i * n + j] - mx);
      out->data[i * n + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < width; ++j) out->data[i * n + j] /= sum;
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, out, widths, m, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t width = widths[i];
        double dot = 0.0;
        for (std::size_t j = 0; j < width; ++j) dot += out->grad[i * n + j] * out->data[i * n + j];
        for (std::size_t j = 0; j < width; ++j)
          x->grad[i * n + j] += out->data[i * n + j] * (out->grad[i * n + j] - dot);
      }
    });
  }
  return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta) {
  check_2d(x, "layer_norm");
  const std::size_t m = x->dims[0], n = x->dims[1];
  if (gamma && gamma->numel() != n) {
    throw ShapeError("layer_norm: gamma " + dims_str(gamma->dims) + " does not match width " + std::to_string(n));
  }
  if (beta && beta->numel() != n) {
    throw ShapeError("layer_norm: beta " + dims_str(beta->dims) + " does not match width " + std::to_string(n));
  }
  bool rg = track_grad(x) || (gamma && track_grad(gamma)) || (beta && track_grad(beta));
  auto out = Tensor::make({m, n}, x->dtype, rg);
  // keep per-row stats for the backward pass
  auto norm = Tensor::make({m, n}, Dtype::F64, false);
  std::vector<double> inv_sigma(m);
  std::vector<char> floored(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x->data[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x->data[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    floored[i] = var <= kLayerNormVarFloor;
    const double sigma = std::sqrt(std::max(var, kLayerNormVarFloor));
    inv_sigma[i] = 1.0 / sigma;
    for (std::size_t j = 0; j < n; ++j) {
      const double y = (x->data[i * n + j] - mu) * inv_sigma[i];
      norm->data[i * n + j] = y;
      out->data[i * n + j] = (gamma ? gamma->data[j] : 1.0) * y + (beta ? beta->data[j] : 0.0);
    }
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, gamma, beta, out, norm, inv_sigma, floored, m, n] {
      for (std::size_t i = 0; i < m; ++i) {
        // pull the affine part off first
        std::vector<double> dy(n);
        for (std::size_t j = 0; j < n; ++j) {
          const double g = out->grad[i * n + j];
          dy[j] = g * (gamma ? gamma->data[j] : 1.0);
        }
        if (gamma && gamma->requires_grad) {
          gamma->ensure_grad();
          for (std::size_t j = 0; j < n; ++j) gamma->grad[j] += out->grad[i * n + j] * norm->data[i * n + j];
        }
        if (beta && beta->requires_grad) {
          beta->ensure_grad();
          for (std::size_t j = 0; j < n; ++j) beta->grad[j] += out->grad[i * n + j];
        }
        if (x->requires_grad) {
          x->ensure_grad();
          double mean_dy = 0.0, mean_dyy = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            mean_dy += dy[j];
            mean_dyy += dy[j] * norm->data[i * n + j];
          }
          mean_dy /= static_cast<double>(n);
          mean_dyy /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            // when the variance hit the floor, sigma is constant w.r.t. x
            double dx = floored[i] ? (dy[j] - mean_dy)
                                   : (dy[j] - mean_dy - norm->data[i * n + j] * mean_dyy);
            x->grad[i * n + j] += dx * inv_sigma[i];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b) {
  check_same_dtype(x, W, "linear");
  check_2d(x, "linear");
  check_2d(W, "linear");
  const std::size_t m = x->dims[0], k = x->dims[1], out_dim = W->dims[0];
  if (W->dims[1] != k) {
    throw ShapeError("linear: x " + dims_str(x->dims) + " vs W " + dims_str(W->dims));
  }
  if (b && b->numel() != out_dim) {
    throw ShapeError("linear: bias " + dims_str(b->dims) + " vs out dim " + std::to_string(out_dim));
  }
  bool rg = track_grad(x, W) || (b && track_grad(b));
  auto out = Tensor::make({m, out_dim}, x->dtype, rg);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = b ? b->data[o] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += x->data[i * k + p] * W->data[o * k + p];
      out->data[i * out_dim + o] = acc;
    }
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, W, b, out, m, k, out_dim] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = out->grad[i * out_dim + o];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) x->grad[i * k + p] += g * W->data[o * k + p];
          }
      }
      if (W->requires_grad) {
        W->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = out->grad[i * out_dim + o];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) W->grad[o * k + p] += g * x->data[i * k + p];
          }
      }
      if (b && b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t o = 0; o < out_dim; ++o) b->grad[o] += out->grad[i * out_dim + o];
      }
    });
  }
  return out;
}

TensorPtr conv1d(const TensorPtr& x, const TensorPtr& kernels, const TensorPtr& bias, std::size_t stride,
                 std::size_t pad) {
  check_same_dtype(x, kernels, "conv1d");
  if (x->rank() != 2) throw ShapeError("conv1d: x must be [Cin x L], got " + dims_str(x->dims));
  if (kernels->rank() != 3) {
    throw ShapeError("conv1d: kernels must be [Cout x Cin x kl], got " + dims_str(kernels->dims));
  }
  if (stride == 0) throw ContractError("conv1d: stride must be positive");
  const std::size_t cin = x->dims[0], L = x->dims[1];
  const std::size_t cout = kernels->dims[0], kcin = kernels->dims[1], kl = kernels->dims[2];
  if (kcin != cin) throw ShapeError("conv1d: channel mismatch " + dims_str(x->dims) + " vs " + dims_str(kernels->dims));
  if (L + 2 * pad < kl) throw ShapeError("conv1d: kernel longer than padded input");
  const std::size_t lout = (L + 2 * pad - kl) / stride + 1;
  bool rg = track_grad(x, kernels) || (bias && track_grad(bias));
  auto out = Tensor::make({cout, lout}, x->dtype, rg);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ol = 0; ol < lout; ++ol) {
      double acc = bias ? bias->data[co] : 0.0;
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t t = 0; t < kl; ++t) {
          const std::ptrdiff_t il = static_cast<std::ptrdiff_t>(ol * stride + t) - static_cast<std::ptrdiff_t>(pad);
          if (il < 0 || il >= static_cast<std::ptrdiff_t>(L)) continue;
          acc += x->data[ci * L + il] * kernels->data[(co * cin + ci) * kl + t];
        }
      out->data[co * lout + ol] = acc;
    }
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, kernels, bias, out, cin, L, cout, kl, lout, stride, pad] {
      if (x->requires_grad) x->ensure_grad();
      if (kernels->requires_grad) kernels->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t ol = 0; ol < lout; ++ol) {
          const double g = out->grad[co * lout + ol];
          if (g == 0.0) continue;
          if (bias && bias->requires_grad) bias->grad[co] += g;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t t = 0; t < kl; ++t) {
              const std::ptrdiff_t il =
                  static_cast<std::ptrdiff_t>(ol * stride + t) - static_cast<std::ptrdiff_t>(pad);
              if (il < 0 || il >= static_cast<std::ptrdiff_t>(L)) continue;
              if (x->requires_grad) x->grad[ci * L + il] += g * kernels->data[(co * cin + ci) * kl + t];
              if (kernels->requires_grad) kernels->grad[(co * cin + ci) * kl + t] += g * x->data[ci * L + il];
            }
        }
    });
  }
  return out;
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& kernels, const TensorPtr& bias, std::size_t stride,
                 std::size_t pad) {
  check_same_dtype(x, kernels, "conv2d");
  if (x->rank() != 3) throw ShapeError("conv2d: x must be [Cin x H x W], got " + dims_str(x->dims));
  if (kernels->rank() != 4) {
    throw ShapeError("conv2d: kernels must be [Cout x Cin x kh x kw], got " + dims_str(kernels->dims));
  }
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t cin = x->dims[0], H = x->dims[1], W = x->dims[2];
  const std::size_t cout = kernels->dims[0], kcin = kernels->dims[1], kh = kernels->dims[2], kw = kernels->dims[3];
  if (kcin != cin) throw ShapeError("conv2d: channel mismatch " + dims_str(x->dims) + " vs " + dims_str(kernels->dims));
  if (H + 2 * pad < kh || W + 2 * pad < kw) throw ShapeError("conv2d: kernel exceeds padded input");
  const std::size_t hout = (H + 2 * pad - kh) / stride + 1;
  const std::size_t wout = (W + 2 * pad - kw) / stride + 1;
  bool rg = track_grad(x, kernels) || (bias && track_grad(bias));
  auto out = Tensor::make({cout, hout, wout}, x->dtype, rg);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oh = 0; oh < hout; ++oh)
      for (std::size_t ow = 0; ow < wout; ++ow) {
        double acc = bias ? bias->data[co] : 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t r = 0; r < kh; ++r) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + r) - static_cast<std::ptrdiff_t>(pad);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t c = 0; c < kw; ++c) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + c) - static_cast<std::ptrdiff_t>(pad);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += x->data[(ci * H + ih) * W + iw] * kernels->data[((co * cin + ci) * kh + r) * kw + c];
            }
          }
        out->data[(co * hout + oh) * wout + ow] = acc;
      }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, kernels, bias, out, cin, H, W, cout, kh, kw, hout, wout, stride, pad] {
      if (x->requires_grad) x->ensure_grad();
      if (kernels->requires_grad) kernels->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t oh = 0; oh < hout; ++oh)
          for (std::size_t ow = 0; ow < wout; ++ow) {
            const double g = out->grad[(co * hout + oh) * wout + ow];
            if (g == 0.0) continue;
            if (bias && bias->requires_grad) bias->grad[co] += g;
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t r = 0; r < kh; ++r) {
                const std::ptrdiff_t ih =
                    static_cast<std::ptrdiff_t>(oh * stride + r) - static_cast<std::ptrdiff_t>(pad);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t c = 0; c < kw; ++c) {
                  const std::ptrdiff_t iw =
                      static_cast<std::ptrdiff_t>(ow * stride + c) - static_cast<std::ptrdiff_t>(pad);
                  if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                  const std::size_t xi = (ci * H + ih) * W + iw;
                  const std::size_t ki = ((co * cin + ci) * kh + r) * kw + c;
                  if (x->requires_grad) x->grad[xi] += g * kernels->data[ki];
                  if (kernels->requires_grad) kernels->grad[ki] += g * x->data[xi];
                }
              }
          }
    });
  }
  return out;
}

TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<std::size_t>& ids) {
  check_2d(table, "embedding_lookup");
  const std::size_t V = table->dims[0], d = table->dims[1];
  for (std::size_t id : ids) {
    if (id >= V) {
      throw ContractError("embedding_lookup: id " + std::to_string(id) + " out of vocabulary range " +
                          std::to_string(V));
    }
  }
  if (ids.empty()) throw ContractError("embedding_lookup: empty id list");
  auto out = out_like({ids.size(), d}, table);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out->data[i * d + j] = table->data[ids[i] * d + j];
  if (out->requires_grad) {
    Tape::current().record([table, out, ids, d] {
      table->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) table->grad[ids[i] * d + j] += out->grad[i * d + j];
    });
  }
  return out;
}

TensorPtr concat(const std::vector<TensorPtr>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  if (axis > 1) throw ContractError("concat: axis must be 0 or 1");
  for (const auto& p : parts) check_2d(p, "concat");
  const std::size_t fixed = axis == 0 ? parts[0]->dims[1] : parts[0]->dims[0];
  std::size_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    const std::size_t f = axis == 0 ? p->dims[1] : p->dims[0];
    if (f != fixed) {
      throw ShapeError("concat: incompatible part " + dims_str(p->dims) + " vs " + dims_str(parts[0]->dims));
    }
    check_same_dtype(parts[0], p, "concat");
    total += axis == 0 ? p->dims[0] : p->dims[1];
    rg = rg || track_grad(p);
  }
  const std::size_t m = axis == 0 ? total : fixed;
  const std::size_t n = axis == 0 ? fixed : total;
  auto out = Tensor::make({m, n}, parts[0]->dtype, rg);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t pm = p->dims[0], pn = p->dims[1];
    for (std::size_t i = 0; i < pm; ++i)
      for (std::size_t j = 0; j < pn; ++j) {
        if (axis == 0)
          out->data[(offset + i) * n + j] = p->data[i * pn + j];
        else
          out->data[i * n + offset + j] = p->data[i * pn + j];
      }
    offset += axis == 0 ? pm : pn;
  }
  if (out->requires_grad) {
    Tape::current().record([parts, out, axis, n] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        const std::size_t pm = p->dims[0], pn = p->dims[1];
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < pm; ++i)
            for (std::size_t j = 0; j < pn; ++j) {
              if (axis == 0)
                p->grad[i * pn + j] += out->grad[(off + i) * n + j];
              else
                p->grad[i * pn + j] += out->grad[i * n + off + j];
            }
        }
        off += axis == 0 ? pm : pn;
      }
    });
  }
  return out;
}

TensorPtr mean_pool(const TensorPtr& x, std::size_t axis) {
  check_2d(x, "mean_pool");
  if (axis > 1) throw ContractError("mean_pool: axis must be 0 or 1");
  const std::size_t m = x->dims[0], n = x->dims[1];
  const std::size_t om = axis == 0 ? 1 : m;
  const std::size_t on = axis == 0 ? n : 1;
  auto out = out_like({om, on}, x);
  if (axis == 0) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += x->data[i * n + j];
      out->data[j] = acc / static_cast<double>(m);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += x->data[i * n + j];
      out->data[i] = acc / static_cast<double>(n);
    }
  }
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, out, axis, m, n] {
      x->ensure_grad();
      if (axis == 0) {
        for (std::size_t j = 0; j < n; ++j) {
          const double g = out->grad[j] / static_cast<double>(m);
          for (std::size_t i = 0; i < m; ++i) x->grad[i * n + j] += g;
        }
      } else {
        for (std::size_t i = 0; i < m; ++i) {
          const double g = out->grad[i] / static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) x->grad[i * n + j] += g;
        }
      }
    });
  }
  return out;
}

TensorPtr sum_all(const TensorPtr& x) {
  auto out = Tensor::make({1}, x->dtype, track_grad(x));
  double acc = 0.0;
  for (double v : x->data) acc += v;
  out->data[0] = acc;
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([x, out] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[0];
    });
  }
  return out;
}

TensorPtr mean_all(const TensorPtr& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x->numel()));
}

TensorPtr slice_rows(const TensorPtr& x, std::size_t from, std::size_t count) {
  check_2d(x, "slice_rows");
  const std::size_t m = x->dims[0], n = x->dims[1];
  if (count == 0 || from + count > m) {
    throw ShapeError("slice_rows: range [" + std::to_string(from) + ", " + std::to_string(from + count) +
                     ") out of " + dims_str(x->dims));
  }
  auto out = out_like({count, n}, x);
  std::copy(x->data.begin() + from * n, x->data.begin() + (from + count) * n, out->data.begin());
  if (out->requires_grad) {
    Tape::current().record([x, out, from, count, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < count * n; ++i) x->grad[from * n + i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr slice_cols(const TensorPtr& x, std::size_t from, std::size_t count) {
  check_2d(x, "slice_cols");
  const std::size_t m = x->dims[0], n = x->dims[1];
  if (count == 0 || from + count > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(from) + ", " + std::to_string(from + count) +
                     ") out of " + dims_str(x->dims));
  }
  auto out = out_like({m, count}, x);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out->data[i * count + j] = x->data[i * n + from + j];
  if (out->requires_grad) {
    Tape::current().record([x, out, from, count, m, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) x->grad[i * n + from + j] += out->grad[i * count + j];
    });
  }
  return out;
}

TensorPtr reshape(const TensorPtr& x, std::vector<std::size_t> dims) {
  if (checked_numel(dims) != x->numel()) {
    throw ShapeError("reshape: " + dims_str(x->dims) + " to " + dims_str(dims) + " changes element count");
  }
  auto out = Tensor::make(dims, x->dtype, track_grad(x));
  out->data = x->data;
  if (out->requires_grad) {
    Tape::current().record([x, out] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr cross_entropy_rows(const TensorPtr& logits, const std::vector<std::size_t>& labels) {
  check_2d(logits, "cross_entropy_rows");
  const std::size_t m = logits->dims[0], n = logits->dims[1];
  if (labels.size() != m) {
    throw ShapeError("cross_entropy_rows: " + std::to_string(labels.size()) + " labels for " + std::to_string(m) +
                     " rows");
  }
  for (std::size_t l : labels) {
    if (l >= n) throw ContractError("cross_entropy_rows: label " + std::to_string(l) + " out of range");
  }
  auto out = Tensor::make({1}, logits->dtype, track_grad(logits));
  // cache row softmaxes for the backward pass
  auto soft = Tensor::make({m, n}, Dtype::F64, false);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double mx = logits->data[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits->data[i * n + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(logits->data[i * n + j] - mx);
      soft->data[i * n + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) soft->data[i * n + j] /= sum;
    total += std::log(sum) + mx - logits->data[i * n + labels[i]];
  }
  out->data[0] = total / static_cast<double>(m);
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([logits, out, soft, labels, m, n] {
      logits->ensure_grad();
      const double g = out->grad[0] / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double onehot = j == labels[i] ? 1.0 : 0.0;
          logits->grad[i * n + j] += g * (soft->data[i * n + j] - onehot);
        }
    });
  }
  return out;
}

TensorPtr mse(const TensorPtr& pred, const TensorPtr& target) {
  check_same_dtype(pred, target, "mse");
  if (pred->dims != target->dims) {
    throw ShapeError("mse: shape mismatch " + dims_str(pred->dims) + " vs " + dims_str(target->dims));
  }
  auto out = Tensor::make({1}, pred->dtype, track_grad(pred, target));
  const std::size_t n = pred->numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred->data[i] - target->data[i];
    acc += d * d;
  }
  out->data[0] = acc / static_cast<double>(n);
  out->quantize();
  if (out->requires_grad) {
    Tape::current().record([pred, target, out, n] {
      const double g = 2.0 * out->grad[0] / static_cast<double>(n);
      if (pred->requires_grad) {
        pred->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) pred->grad[i] += g * (pred->data[i] - target->data[i]);
      }
      if (target->requires_grad) {
        target->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) target->grad[i] -= g * (pred->data[i] - target->data[i]);
      }
    });
  }
  return out;
}

}  // namespace allspark
