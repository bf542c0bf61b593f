#pragma once

#include "allspark/tensor.hpp"

namespace allspark {

// Every op registers its gradient rule on the thread tape when an input has
// requires_grad set (and grad mode is on). Kernels accumulate in double and
// quantize results in F32 mode. Binary ops demand matching dtypes; the only
// implicit broadcast is scalar-with-tensor.

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(const TensorPtr& x);

TensorPtr gelu(const TensorPtr& x);
TensorPtr softmax_rows(const TensorPtr& x);
/// Row i is a softmax over columns [0, i]; later columns are exactly zero.
TensorPtr softmax_rows_causal(const TensorPtr& x);

/// Row i is a softmax over columns [0, widths[i]); later columns are zero.
TensorPtr softmax_rows_widths(const TensorPtr& x, const std::vector<std::size_t>& widths);

/// Row-wise normalization. Variance is floored at 1e-5, so a constant row
/// maps to zeros pre-affine. gamma/beta may be null (no affine).
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma = nullptr, const TensorPtr& beta = nullptr);

/// y = x . W^T + b with x [m x k], W [out x k], b [out] (b may be null).
TensorPtr linear(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b = nullptr);

/// x [Cin x L], kernels [Cout x Cin x kl] -> [Cout x Lout]; explicit zero padding.
TensorPtr conv1d(const TensorPtr& x, const TensorPtr& kernels, const TensorPtr& bias, std::size_t stride,
                 std::size_t pad = 0);

/// x [Cin x H x W], kernels [Cout x Cin x kh x kw] -> [Cout x Hout x Wout].
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& kernels, const TensorPtr& bias, std::size_t stride,
                 std::size_t pad = 0);

/// table [V x d], ids in [0, V) -> [n x d].
TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<std::size_t>& ids);

/// Concatenate 2-d tensors along axis 0 (rows) or 1 (cols).
TensorPtr concat(const std::vector<TensorPtr>& parts, std::size_t axis);

/// axis 0: column means -> [1 x n]; axis 1: row means -> [m x 1].
TensorPtr mean_pool(const TensorPtr& x, std::size_t axis);

TensorPtr sum_all(const TensorPtr& x);
TensorPtr mean_all(const TensorPtr& x);

TensorPtr slice_rows(const TensorPtr& x, std::size_t from, std::size_t count);
TensorPtr slice_cols(const TensorPtr& x, std::size_t from, std::size_t count);
TensorPtr reshape(const TensorPtr& x, std::vector<std::size_t> dims);

/// Mean softmax cross-entropy over rows; labels[r] indexes row r's target.
TensorPtr cross_entropy_rows(const TensorPtr& logits, const std::vector<std::size_t>& labels);

/// Mean squared error over all elements.
TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);

}  // namespace allspark
