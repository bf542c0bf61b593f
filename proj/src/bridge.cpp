#include "allspark/bridge.hpp"

#include <cmath>

#include "allspark/ops.hpp"

namespace allspark {

namespace {

std::string layer_prefix(std::size_t l) { return "bridge.l" + std::to_string(l) + "."; }

void check_input(const ParamStore& store, const BridgeConfig& cfg, const TokenSequence& t) {
  if (cfg.layers == 0) throw ContractError("bridge: layers must be >= 1");
  auto wk = store.get(layer_prefix(0) + "wk");
  if (wk->dims[0] != t.d()) {
    throw ShapeError("bridge: token dim " + std::to_string(t.d()) + " does not match Wk " + dims_str(wk->dims));
  }
  if (cfg.layers > 1 && cfg.hidden != cfg.dim) {
    throw ContractError("bridge: stacked layers need hidden == D");
  }
}

/// One cross-attention read: queries [N x D] against tokens [n x d].
TensorPtr cross_attend(const ParamStore& store, const BridgeConfig& cfg, std::size_t layer, const TensorPtr& queries,
                       const TensorPtr& tokens, TensorPtr* att_out = nullptr) {
  const std::string lp = layer_prefix(layer);
  auto qp = matmul(queries, store.get(lp + "wq"));                 // N x hidden
  auto kp = matmul(tokens, store.get(lp + "wk"));                  // n x hidden
  auto vp = matmul(tokens, store.get(lp + "wv"));                  // n x hidden
  auto scores = scale(matmul(qp, transpose(kp)), 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  auto att = softmax_rows(scores);                                 // N x n
  if (att_out) *att_out = att;
  return matmul(att, vp);                                          // N x hidden
}

TensorPtr ffn_forward(const ParamStore& store, std::size_t layer, const TensorPtr& x) {
  const std::string lp = layer_prefix(layer);
  auto h = gelu(linear(x, store.get(lp + "ffn.w1"), store.get(lp + "ffn.b1")));
  return linear(h, store.get(lp + "ffn.w2"), store.get(lp + "ffn.b2"));
}

}  // namespace

void init_bridge_params(ParamStore& store, const BridgeConfig& cfg, std::size_t token_dim, Dtype dt, Rng& rng) {
  if (cfg.queries == 0 || cfg.hidden == 0) throw ContractError("bridge: N and hidden must be >= 1");
  if (cfg.layers > 1 && cfg.hidden != cfg.dim) throw ContractError("bridge: stacked layers need hidden == D");
  auto q = store.create("bridge.q", {cfg.queries, cfg.dim}, dt, false);
  init_normal(*q, rng, 0.2);
  const std::size_t f = cfg.hidden * cfg.ffn_expansion;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = layer_prefix(l);
    auto wq = store.create(lp + "wq", {cfg.dim, cfg.hidden}, dt, false);
    init_xavier(*wq, rng, cfg.dim, cfg.hidden);
    auto wk = store.create(lp + "wk", {token_dim, cfg.hidden}, dt, false);
    init_xavier(*wk, rng, token_dim, cfg.hidden);
    auto wv = store.create(lp + "wv", {token_dim, cfg.hidden}, dt, false);
    init_xavier(*wv, rng, token_dim, cfg.hidden);
    auto w1 = store.create(lp + "ffn.w1", {f, cfg.hidden}, dt, false);
    init_xavier(*w1, rng, cfg.hidden, f);
    init_zeros(*store.create(lp + "ffn.b1", {f}, dt, false));
    auto w2 = store.create(lp + "ffn.w2", {cfg.dim, f}, dt, false);
    init_xavier(*w2, rng, f, cfg.dim);
    init_zeros(*store.create(lp + "ffn.b2", {cfg.dim}, dt, false));
    if (cfg.layers > 1) {
      for (const char* ln : {"ln1.", "ln2."}) {
        init_ones(*store.create(lp + ln + "g", {cfg.dim}, dt, false));
        init_zeros(*store.create(lp + ln + "b", {cfg.dim}, dt, false));
      }
    }
  }
}

TensorPtr bridge_forward(const ParamStore& store, const BridgeConfig& cfg, const TokenSequence& t) {
  check_input(store, cfg, t);
  auto x = store.get("bridge.q");
  if (cfg.layers == 1) {
    auto ctx = cross_attend(store, cfg, 0, x, t.tokens);
    return ffn_forward(store, 0, ctx);
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = layer_prefix(l);
    auto h = layer_norm(x, store.get(lp + "ln1.g"), store.get(lp + "ln1.b"));
    x = add(x, cross_attend(store, cfg, l, h, t.tokens));
    auto h2 = layer_norm(x, store.get(lp + "ln2.g"), store.get(lp + "ln2.b"));
    x = add(x, ffn_forward(store, l, h2));
  }
  return x;
}

TensorPtr attention_weights(const ParamStore& store, const BridgeConfig& cfg, const TokenSequence& t,
                            std::size_t layer) {
  check_input(store, cfg, t);
  if (layer >= cfg.layers) {
    throw ContractError("bridge: layer " + std::to_string(layer) + " out of range, have " +
                        std::to_string(cfg.layers));
  }
  auto x = store.get("bridge.q");
  TensorPtr att;
  if (cfg.layers == 1) {
    cross_attend(store, cfg, 0, x, t.tokens, &att);
    return att;
  }
  for (std::size_t l = 0; l <= layer; ++l) {
    const std::string lp = layer_prefix(l);
    auto h = layer_norm(x, store.get(lp + "ln1.g"), store.get(lp + "ln1.b"));
    x = add(x, cross_attend(store, cfg, l, h, t.tokens, l == layer ? &att : nullptr));
    auto h2 = layer_norm(x, store.get(lp + "ln2.g"), store.get(lp + "ln2.b"));
    x = add(x, ffn_forward(store, l, h2));
  }
  return att;
}

void set_bridge_ffn_identity(ParamStore& store, const BridgeConfig& cfg, std::size_t layer) {
  if (cfg.ffn_expansion < 2) throw ContractError("identity FFN needs expansion >= 2");
  if (cfg.dim != cfg.hidden) throw ContractError("identity FFN needs hidden == D");
  const std::string lp = layer_prefix(layer);
  auto w1 = store.get(lp + "ffn.w1");
  auto w2 = store.get(lp + "ffn.w2");
  init_zeros(*w1);
  init_zeros(*w2);
  init_zeros(*store.get(lp + "ffn.b1"));
  init_zeros(*store.get(lp + "ffn.b2"));
  const std::size_t h = cfg.hidden;
  for (std::size_t i = 0; i < h; ++i) {
    w1->data[i * h + i] = 1.0;                // rows 0..h-1: +I
    w1->data[(h + i) * h + i] = -1.0;         // rows h..2h-1: -I
    w2->data[i * (h * cfg.ffn_expansion) + i] = 1.0;
    w2->data[i * (h * cfg.ffn_expansion) + h + i] = -1.0;
  }
}

}  // namespace allspark
