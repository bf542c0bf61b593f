#include "allspark/heads.hpp"

#include "allspark/ops.hpp"

namespace allspark {

void validate_head_spec(const HeadSpec& spec) {
  if (spec.kind == HeadKind::Classify && spec.num_classes < 2) {
    throw ContractError("head: num_classes must be >= 2");
  }
  if (spec.kind == HeadKind::Regress && !(spec.target_std > 0.0)) {
    throw ContractError("head: target_std must be positive");
  }
  if (spec.kind == HeadKind::DepthRegress && (spec.out_h == 0 || spec.out_w == 0)) {
    throw ContractError("head: depth grid dims must be positive");
  }
}

void init_head_params(ParamStore& store, const HeadSpec& spec, std::size_t dim, Dtype dt, Rng& rng) {
  validate_head_spec(spec);
  std::size_t out = 0;
  switch (spec.kind) {
    case HeadKind::Classify: out = spec.num_classes; break;
    case HeadKind::Regress: out = 1; break;
    case HeadKind::DepthRegress: out = spec.out_h * spec.out_w; break;
    case HeadKind::TextDecode: return;  // native decoder, no parameters
  }
  auto w = store.create("head.w", {out, dim}, dt, false);
  init_xavier(*w, rng, dim, out);
  init_zeros(*store.create("head.b", {out}, dt, false));
}

TensorPtr head_forward(const ParamStore& store, const HeadSpec& spec, const TensorPtr& hidden,
                       std::size_t boundary) {
  validate_head_spec(spec);
  if (spec.kind == HeadKind::TextDecode) {
    throw ContractError("head: TextDecode delegates to the backbone decoder");
  }
  if (hidden->rank() != 2 || hidden->dims[0] == 0) {
    throw ShapeError("head: hidden must be [len x D], got " + dims_str(hidden->dims));
  }
  TensorPtr pooled;
  if (spec.pooling == Pooling::LastToken) {
    pooled = slice_rows(hidden, hidden->dims[0] - 1, 1);
  } else {
    if (boundary == 0 || boundary > hidden->dims[0]) {
      throw ContractError("head: modal boundary " + std::to_string(boundary) + " invalid for pooling");
    }
    pooled = mean_pool(slice_rows(hidden, 0, boundary), 0);
  }
  auto z = linear(pooled, store.get("head.w"), store.get("head.b"));
  switch (spec.kind) {
    case HeadKind::Classify:
      return z;
    case HeadKind::Regress: {
      auto s = Tensor::scalar(spec.target_std, z->dtype);
      auto m = Tensor::scalar(spec.target_mean, z->dtype);
      return add(mul(z, s), m);
    }
    case HeadKind::DepthRegress:
      return reshape(z, {spec.out_h, spec.out_w});
    case HeadKind::TextDecode:
      break;
  }
  throw ContractError("head: bad kind");
}

std::size_t argmax_row(const Tensor& logits) {
  if (logits.numel() == 0) throw ContractError("argmax of empty tensor");
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.numel(); ++j) {
    if (logits.data[j] > logits.data[best]) best = j;
  }
  return best;
}

}  // namespace allspark
