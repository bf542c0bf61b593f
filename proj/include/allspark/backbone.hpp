#pragma once

#include "allspark/params.hpp"

namespace allspark {

/// Desk-scale decoder-only stand-in for the multimodal language model:
/// frozen base (token/position embeddings, attention, FFN, norms) plus
/// trainable bottleneck adapters after each block's FFN.
struct BackboneConfig {
  std::size_t dim = 64;          // D, shared with the bridge output
  std::size_t blocks = 2;        // L_f
  std::size_t heads = 4;
  std::size_t context = 128;
  std::size_t adapter_rank = 8;  // r
  std::size_t ffn_expansion = 4;
  std::size_t vocab = 260;
  /// Config alternative: let every position attend to the whole modal
  /// prefix instead of masking it causally.
  bool modal_prefix_full_attention = false;
};

/// Bridged modal tokens followed by prompt token embeddings.
struct AssembledSequence {
  TensorPtr embeddings;     // (N + n_p) x D
  std::size_t boundary = 0; // N: index of the first prompt position
};

void init_backbone_params(ParamStore& store, const BackboneConfig& cfg, Dtype dt, Rng& rng);

/// [modal tokens | prompt embeddings]; empty prompt gives boundary == length.
AssembledSequence assemble(const ParamStore& store, const BackboneConfig& cfg, const TensorPtr& bridged,
                           const std::vector<std::size_t>& prompt_ids);

/// Causal self-attention over the assembled sequence; adapters run after
/// each block's FFN with a residual. Returns final hidden states.
TensorPtr backbone_forward(const ParamStore& store, const BackboneConfig& cfg, const AssembledSequence& seq);

/// Logits of the next token at every position, tied to the embedding table.
TensorPtr lm_logits(const ParamStore& store, const TensorPtr& hidden);

/// Greedy argmax continuation until eos or max_len new tokens.
std::vector<std::size_t> decode_text(const ParamStore& store, const BackboneConfig& cfg,
                                     const AssembledSequence& seq, std::size_t max_len);

}  // namespace allspark
