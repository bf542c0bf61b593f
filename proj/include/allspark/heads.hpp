#pragma once

#include "allspark/params.hpp"

namespace allspark {

enum class HeadKind { Classify, Regress, TextDecode, DepthRegress };
enum class Pooling { LastToken, MeanOverModal };

/// Single linear layer over a pooled hidden state. Regress adds the fixed
/// de-normalization y = z * target_std + target_mean (no learnable
/// parameters); DepthRegress emits a coarse out_h x out_w grid.
struct HeadSpec {
  HeadKind kind = HeadKind::Classify;
  Pooling pooling = Pooling::LastToken;
  std::size_t num_classes = 2;
  double target_mean = 0.0;
  double target_std = 1.0;
  std::size_t out_h = 0, out_w = 0;
};

void validate_head_spec(const HeadSpec& spec);
void init_head_params(ParamStore& store, const HeadSpec& spec, std::size_t dim, Dtype dt, Rng& rng);

/// hidden [(N + n_p) x D] -> logits [1 x classes] / unscaled value [1 x 1] /
/// grid [out_h x out_w]. TextDecode has no head parameters and must go
/// through the backbone decoder instead.
TensorPtr head_forward(const ParamStore& store, const HeadSpec& spec, const TensorPtr& hidden,
                       std::size_t boundary);

/// Lowest index wins ties.
std::size_t argmax_row(const Tensor& logits);

}  // namespace allspark
