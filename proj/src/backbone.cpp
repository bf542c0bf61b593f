#include "allspark/backbone.hpp"

#include <cmath>

#include "allspark/ops.hpp"
#include "allspark/tokenizer.hpp"

namespace allspark {

namespace {

std::string block_prefix(std::size_t b) { return "backbone.b" + std::to_string(b) + "."; }

/// Multi-head attention with per-row visibility widths.
TensorPtr masked_attention(const ParamStore& store, const std::string& lp, std::size_t heads, const TensorPtr& x,
                           const std::vector<std::size_t>& widths) {
  const std::size_t d = x->dims[1];
  const std::size_t hd = d / heads;
  auto q = linear(x, store.get(lp + "attn.wq"), store.get(lp + "attn.bq"));
  auto k = linear(x, store.get(lp + "attn.wk"), store.get(lp + "attn.bk"));
  auto v = linear(x, store.get(lp + "attn.wv"), store.get(lp + "attn.bv"));
  std::vector<TensorPtr> outs;
  outs.reserve(heads);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * hd, hd);
    auto kh = slice_cols(k, h * hd, hd);
    auto vh = slice_cols(v, h * hd, hd);
    auto att = softmax_rows_widths(scale(matmul(qh, transpose(kh)), inv_scale), widths);
    outs.push_back(matmul(att, vh));
  }
  auto merged = heads == 1 ? outs[0] : concat(outs, 1);
  return linear(merged, store.get(lp + "attn.wo"), store.get(lp + "attn.bo"));
}

std::vector<std::size_t> visibility_widths(const BackboneConfig& cfg, std::size_t length, std::size_t boundary) {
  std::vector<std::size_t> widths(length);
  for (std::size_t i = 0; i < length; ++i) {
    if (cfg.modal_prefix_full_attention && i < boundary)
      widths[i] = boundary;
    else
      widths[i] = i + 1;
  }
  return widths;
}

}  // namespace

void init_backbone_params(ParamStore& store, const BackboneConfig& cfg, Dtype dt, Rng& rng) {
  if (cfg.dim % cfg.heads != 0) throw ContractError("backbone: dim must be divisible by heads");
  // base weights are frozen; only the adapters train
  auto emb = store.create("backbone.emb", {cfg.vocab, cfg.dim}, dt, true);
  init_normal(*emb, rng, 0.35);
  auto pos = store.create("backbone.pos", {cfg.context, cfg.dim}, dt, true);
  init_normal(*pos, rng, 0.15);
  const std::size_t f = cfg.dim * cfg.ffn_expansion;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string lp = block_prefix(b);
    for (const char* ln : {"ln1.", "ln2."}) {
      init_ones(*store.create(lp + ln + "g", {cfg.dim}, dt, true));
      init_zeros(*store.create(lp + ln + "b", {cfg.dim}, dt, true));
    }
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      auto W = store.create(lp + w, {cfg.dim, cfg.dim}, dt, true);
      init_xavier(*W, rng, cfg.dim, cfg.dim);
    }
    for (const char* bn : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) {
      init_zeros(*store.create(lp + bn, {cfg.dim}, dt, true));
    }
    auto w1 = store.create(lp + "ffn.w1", {f, cfg.dim}, dt, true);
    init_xavier(*w1, rng, cfg.dim, f);
    init_zeros(*store.create(lp + "ffn.b1", {f}, dt, true));
    auto w2 = store.create(lp + "ffn.w2", {cfg.dim, f}, dt, true);
    init_xavier(*w2, rng, f, cfg.dim);
    init_zeros(*store.create(lp + "ffn.b2", {cfg.dim}, dt, true));
    // adapter: down-project, gelu, zero-initialized up-projection
    auto down = store.create(lp + "adapter.down.w", {cfg.adapter_rank, cfg.dim}, dt, false);
    init_xavier(*down, rng, cfg.dim, cfg.adapter_rank);
    init_zeros(*store.create(lp + "adapter.down.b", {cfg.adapter_rank}, dt, false));
    init_zeros(*store.create(lp + "adapter.up.w", {cfg.dim, cfg.adapter_rank}, dt, false));
    init_zeros(*store.create(lp + "adapter.up.b", {cfg.dim}, dt, false));
  }
  init_ones(*store.create("backbone.lnf.g", {cfg.dim}, dt, true));
  init_zeros(*store.create("backbone.lnf.b", {cfg.dim}, dt, true));
}

AssembledSequence assemble(const ParamStore& store, const BackboneConfig& cfg, const TensorPtr& bridged,
                           const std::vector<std::size_t>& prompt_ids) {
  for (std::size_t id : prompt_ids) {
    if (id >= cfg.vocab) {
      throw ContractError("assemble: prompt id " + std::to_string(id) + " overflows vocab " +
                          std::to_string(cfg.vocab));
    }
  }
  const std::size_t total = bridged->dims[0] + prompt_ids.size();
  if (total > cfg.context) {
    throw ContractError("assemble: sequence length " + std::to_string(total) + " exceeds context " +
                        std::to_string(cfg.context));
  }
  AssembledSequence seq;
  seq.boundary = bridged->dims[0];
  if (prompt_ids.empty()) {
    seq.embeddings = bridged;
  } else {
    seq.embeddings = concat({bridged, embedding_lookup(store.get("backbone.emb"), prompt_ids)}, 0);
  }
  return seq;
}

TensorPtr backbone_forward(const ParamStore& store, const BackboneConfig& cfg, const AssembledSequence& seq) {
  if (!seq.embeddings || seq.embeddings->dims.empty() || seq.embeddings->dims[0] == 0) {
    throw ContractError("backbone: empty assembled sequence");
  }
  const std::size_t L = seq.embeddings->dims[0];
  if (L > cfg.context) {
    throw ContractError("backbone: length " + std::to_string(L) + " exceeds context " + std::to_string(cfg.context));
  }
  // zero blocks is the identity backbone
  if (cfg.blocks == 0) return seq.embeddings;
  auto widths = visibility_widths(cfg, L, seq.boundary);
  auto x = add(seq.embeddings, slice_rows(store.get("backbone.pos"), 0, L));
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string lp = block_prefix(b);
    auto h = layer_norm(x, store.get(lp + "ln1.g"), store.get(lp + "ln1.b"));
    x = add(x, masked_attention(store, lp, cfg.heads, h, widths));
    auto h2 = layer_norm(x, store.get(lp + "ln2.g"), store.get(lp + "ln2.b"));
    x = add(x, linear(gelu(linear(h2, store.get(lp + "ffn.w1"), store.get(lp + "ffn.b1"))),
                      store.get(lp + "ffn.w2"), store.get(lp + "ffn.b2")));
    auto a = linear(gelu(linear(x, store.get(lp + "adapter.down.w"), store.get(lp + "adapter.down.b"))),
                    store.get(lp + "adapter.up.w"), store.get(lp + "adapter.up.b"));
    x = add(x, a);
  }
  return layer_norm(x, store.get("backbone.lnf.g"), store.get("backbone.lnf.b"));
}

TensorPtr lm_logits(const ParamStore& store, const TensorPtr& hidden) {
  return matmul(hidden, transpose(store.get("backbone.emb")));
}

std::vector<std::size_t> decode_text(const ParamStore& store, const BackboneConfig& cfg,
                                     const AssembledSequence& seq, std::size_t max_len) {
  NoGradGuard off;
  std::vector<std::size_t> out;
  AssembledSequence cur = seq;
  while (out.size() < max_len && cur.embeddings->dims[0] < cfg.context) {
    auto hidden = backbone_forward(store, cfg, cur);
    auto logits = lm_logits(store, slice_rows(hidden, hidden->dims[0] - 1, 1));
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits->dims[1]; ++j) {
      if (logits->data[j] > logits->data[best]) best = j;  // first index wins ties
    }
    if (best == tok::kEos) break;
    out.push_back(best);
    cur.embeddings = concat({cur.embeddings, embedding_lookup(store.get("backbone.emb"), {best})}, 0);
  }
  return out;
}

}  // namespace allspark
