#pragma once

#include "allspark/encoders.hpp"

namespace allspark {

/// Language-model dimension used at full scale; desk configs use 64.
constexpr std::size_t kPaperLanguageDim = 4096;

/// Learnable-query cross-attention bridge: any token sequence [n x d] is
/// projected onto a fixed [N x D] block.
///
/// With layers == 1 the forward is the verbatim single-layer form
///   FFN( softmax(Q Wq (t Wk)^T / sqrt(D)) . (t Wv) )
/// with no residuals. Deeper stacks (layers > 1) replace Q with the previous
/// layer's output and use pre-norm residual wiring around attention and FFN,
/// which requires hidden == D.
struct BridgeConfig {
  std::size_t queries = 8;       // N
  std::size_t dim = 64;          // D
  std::size_t hidden = 64;
  std::size_t layers = 1;        // L_b
  std::size_t ffn_expansion = 4;
};

void init_bridge_params(ParamStore& store, const BridgeConfig& cfg, std::size_t token_dim, Dtype dt, Rng& rng);

TensorPtr bridge_forward(const ParamStore& store, const BridgeConfig& cfg, const TokenSequence& t);

/// Softmax matrix [N x n] of one layer, for diagnostics and tests.
TensorPtr attention_weights(const ParamStore& store, const BridgeConfig& cfg, const TokenSequence& t,
                            std::size_t layer);

/// Loads the FFN of one layer with weights that make it an exact identity:
/// rows [I; -I] into gelu, columns [I | -I] out, using gelu(x) - gelu(-x) = x.
void set_bridge_ffn_identity(ParamStore& store, const BridgeConfig& cfg, std::size_t layer);

}  // namespace allspark
