#include "allspark/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "allspark/ops.hpp"
#include "allspark/tokenizer.hpp"

namespace allspark {

namespace {

const char* kModalityNames[] = {"text",     "code",  "rgb",   "msi",     "hsi",   "table", "trajectory",
                                "sar",      "infrared", "graph", "oblique", "video", "pointcloud"};

std::string enc_prefix(Modality m) { return std::string("encoder.") + modality_name(m) + "."; }

TensorPtr hwc_to_chw(const Tensor& x) {
  if (x.dims.size() != 3) throw ShapeError("expected H x W x C payload, got " + dims_str(x.dims));
  const std::size_t H = x.dims[0], W = x.dims[1], C = x.dims[2];
  auto out = Tensor::make({C, H, W}, x.dtype, false);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t c = 0; c < C; ++c) out->data[(c * H + h) * W + w] = x.data[(h * W + w) * C + c];
  return out;
}

/// Fold H,W through a conv plan; returns final {channels, H, W}.
std::array<std::size_t, 3> conv_plan_shape(std::size_t cin, std::size_t H, std::size_t W,
                                           const std::vector<ConvLayerSpec>& plan) {
  std::size_t c = cin;
  for (const auto& l : plan) {
    if (H + 2 * l.pad < l.kernel || W + 2 * l.pad < l.kernel) {
      throw ShapeError("conv plan kernel " + std::to_string(l.kernel) + " exceeds padded input " +
                       std::to_string(H) + "x" + std::to_string(W));
    }
    H = (H + 2 * l.pad - l.kernel) / l.stride + 1;
    W = (W + 2 * l.pad - l.kernel) / l.stride + 1;
    c = l.out_channels;
  }
  return {c, H, W};
}

void init_conv_plan(ParamStore& store, const std::string& prefix, std::size_t cin,
                    const std::vector<ConvLayerSpec>& plan, Dtype dt, Rng& rng, bool frozen) {
  std::size_t c = cin;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& l = plan[i];
    auto w = store.create(prefix + "conv" + std::to_string(i) + ".w", {l.out_channels, c, l.kernel, l.kernel}, dt,
                          frozen);
    init_xavier(*w, rng, c * l.kernel * l.kernel, l.out_channels * l.kernel * l.kernel);
    auto b = store.create(prefix + "conv" + std::to_string(i) + ".b", {l.out_channels}, dt, frozen);
    init_zeros(*b);
    c = l.out_channels;
  }
}

TensorPtr conv_plan_forward(const ParamStore& store, const std::string& prefix,
                            const std::vector<ConvLayerSpec>& plan, TensorPtr x) {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& l = plan[i];
    x = conv2d(x, store.get(prefix + "conv" + std::to_string(i) + ".w"),
               store.get(prefix + "conv" + std::to_string(i) + ".b"), l.stride, l.pad);
    if (i + 1 < plan.size()) x = gelu(x);
  }
  return x;
}

/// [C x H x W] feature map -> [H*W x C] token rows.
TensorPtr feature_map_to_tokens(const TensorPtr& fm) {
  const std::size_t c = fm->dims[0], cells = fm->dims[1] * fm->dims[2];
  return transpose(reshape(fm, {c, cells}));
}

TensorPtr add_positions(const ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                        const TensorPtr& tokens) {
  const std::size_t n = tokens->dims[0];
  if (n > cfg.max_tokens) {
    throw ContractError(prefix + "token count " + std::to_string(n) + " exceeds max_tokens " +
                        std::to_string(cfg.max_tokens));
  }
  return add(tokens, slice_rows(store.get(prefix + "pos"), 0, n));
}

void init_pos(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg, std::size_t d, Dtype dt,
              Rng& rng, bool frozen) {
  auto pos = store.create(prefix + "pos", {cfg.max_tokens, d}, dt, frozen);
  init_normal(*pos, rng, 0.02);
}

void init_patch_embed(ParamStore& store, const std::string& prefix, std::size_t channels, std::size_t patch,
                      std::size_t d, Dtype dt, Rng& rng, bool frozen) {
  auto w = store.create(prefix + "patch.w", {d, channels, patch, patch}, dt, frozen);
  init_xavier(*w, rng, channels * patch * patch, d);
  auto b = store.create(prefix + "patch.b", {d}, dt, frozen);
  init_zeros(*b);
}

TensorPtr patch_embed(const ParamStore& store, const std::string& prefix, std::size_t patch, const TensorPtr& chw) {
  auto fm = conv2d(chw, store.get(prefix + "patch.w"), store.get(prefix + "patch.b"), patch, 0);
  return feature_map_to_tokens(fm);
}

void check_patch_divisible(std::size_t H, std::size_t W, std::size_t patch, const char* tag) {
  if (H % patch != 0 || W % patch != 0) {
    throw ContractError(std::string(tag) + ": image " + std::to_string(H) + "x" + std::to_string(W) +
                        " not divisible by patch " + std::to_string(patch));
  }
}

std::size_t continuous_bin(const std::vector<double>& edges, double v) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

std::vector<ConvLayerSpec> default_conv_plan(std::size_t d) {
  return {{16, 3, 2, 1}, {d, 3, 2, 1}, {d, 3, 2, 1}};
}

}  // namespace

const std::vector<Modality>& all_modalities() {
  static const std::vector<Modality> v = {
      Modality::Text,   Modality::Code,  Modality::Rgb,     Modality::Msi,   Modality::Hsi,
      Modality::Table,  Modality::Trajectory, Modality::Sar, Modality::Infrared, Modality::Graph,
      Modality::Oblique, Modality::Video, Modality::PointCloud};
  return v;
}

const char* modality_name(Modality m) { return kModalityNames[static_cast<int>(m)]; }

Modality modality_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    if (name == kModalityNames[i]) return static_cast<Modality>(i);
  }
  throw ContractError("unknown modality: " + name);
}

EncoderConfig desk_encoder_config() {
  EncoderConfig cfg;
  cfg.sar.conv = default_conv_plan(cfg.sar.d);
  cfg.infrared.conv = default_conv_plan(cfg.infrared.d);
  cfg.table.columns.resize(8);
  cfg.table.columns[0] = ColumnSpec{true, 24, {}};
  cfg.table.columns[1] = ColumnSpec{true, 12, {}};
  for (std::size_t j = 2; j < 8; ++j) {
    ColumnSpec c;
    c.discrete = false;
    for (int e = 0; e < 15; ++e) c.bin_edges.push_back(-1.5 + 3.0 * (e + 1) / 16.0);
    cfg.table.columns[j] = c;
  }
  return cfg;
}

EncoderConfig paper_encoder_config() {
  EncoderConfig cfg = desk_encoder_config();
  cfg.rgb.depth = 40;
  cfg.msi.depth = 12;
  cfg.hsi.depth = 12;
  cfg.table.depth = 1;
  cfg.trajectory.depth = 2;
  cfg.oblique.depth = 12;
  cfg.video.depth = 6;
  cfg.pointcloud.depth = 12;
  return cfg;
}

std::size_t encoder_width(const EncoderConfig& cfg, Modality m) {
  switch (m) {
    case Modality::Text: return cfg.text.d;
    case Modality::Code: return cfg.code.d;
    case Modality::Rgb: return cfg.rgb.d;
    case Modality::Msi: return cfg.msi.d;
    case Modality::Hsi: return cfg.hsi.d;
    case Modality::Table: return cfg.table.d;
    case Modality::Trajectory: return cfg.trajectory.d;
    case Modality::Sar: return cfg.sar.d;
    case Modality::Infrared: return cfg.infrared.d;
    case Modality::Graph: return cfg.graph.d;
    case Modality::Oblique: return cfg.oblique.d;
    case Modality::Video: return cfg.video.d;
    case Modality::PointCloud: return cfg.pointcloud.d;
  }
  throw ContractError("bad modality");
}

void validate_sample(const EncoderConfig& cfg, const ModalitySample& s) {
  auto need_array = [&](std::size_t rank, const char* what) {
    if (!s.array) throw ContractError(std::string(modality_name(s.tag)) + ": missing array payload");
    if (s.array->rank() != rank) {
      throw ShapeError(std::string(modality_name(s.tag)) + ": expected " + what + ", got " +
                       dims_str(s.array->dims));
    }
    if (!s.array->all_finite()) throw NumericError(std::string(modality_name(s.tag)) + ": non-finite payload");
  };
  switch (s.tag) {
    case Modality::Text:
    case Modality::Code:
      if (s.text.empty()) throw ContractError("text payload is empty");
      break;
    case Modality::Rgb:
      need_array(3, "H x W x 3");
      if (s.array->dims[2] != 3) throw ShapeError("rgb: expected 3 channels, got " + dims_str(s.array->dims));
      check_patch_divisible(s.array->dims[0], s.array->dims[1], cfg.rgb.patch, "rgb");
      break;
    case Modality::Msi:
      need_array(3, "H x W x C");
      if (s.array->dims[2] <= 3) {
        throw ContractError("msi: channel count must exceed 3, got " + std::to_string(s.array->dims[2]));
      }
      if (s.array->dims[2] != cfg.msi.channels) {
        throw ShapeError("msi: configured for " + std::to_string(cfg.msi.channels) + " channels, got " +
                         dims_str(s.array->dims));
      }
      check_patch_divisible(s.array->dims[0], s.array->dims[1], cfg.msi.patch, "msi");
      break;
    case Modality::Hsi:
      need_array(3, "1 x 1 x C");
      if (s.array->dims[0] != 1 || s.array->dims[1] != 1 || s.array->dims[2] != cfg.hsi.bands) {
        throw ShapeError("hsi: expected 1x1x" + std::to_string(cfg.hsi.bands) + ", got " + dims_str(s.array->dims));
      }
      break;
    case Modality::Table: {
      need_array(2, "1 x columns");
      if (s.array->dims[0] != 1 || s.array->dims[1] != cfg.table.columns.size()) {
        throw ShapeError("table: expected 1x" + std::to_string(cfg.table.columns.size()) + " row, got " +
                         dims_str(s.array->dims));
      }
      for (std::size_t j = 0; j < cfg.table.columns.size(); ++j) {
        const auto& col = cfg.table.columns[j];
        if (!col.discrete) continue;
        const double v = s.array->data[j];
        if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(col.vocab)) {
          throw ContractError("table: column " + std::to_string(j) + " value " + std::to_string(v) +
                              " outside discrete vocab " + std::to_string(col.vocab));
        }
      }
      break;
    }
    case Modality::Trajectory:
      need_array(2, "l x 2");
      if (s.array->dims[1] != 2) throw ShapeError("trajectory: expected l x 2, got " + dims_str(s.array->dims));
      break;
    case Modality::Sar:
      need_array(3, "H x W x 2");
      if (s.array->dims[2] != 2) throw ShapeError("sar: expected 2 channels, got " + dims_str(s.array->dims));
      break;
    case Modality::Infrared:
      need_array(4, "2 x H x W x 3");
      if (s.array->dims[0] != 2 || s.array->dims[3] != 3) {
        throw ShapeError("infrared: expected pair 2 x H x W x 3, got " + dims_str(s.array->dims));
      }
      break;
    case Modality::Graph:
      need_array(2, "K x node_dim");
      if (s.array->dims[1] != cfg.graph.node_dim) {
        throw ShapeError("graph: expected node dim " + std::to_string(cfg.graph.node_dim) + ", got " +
                         dims_str(s.array->dims));
      }
      if (s.array->dims[0] > cfg.graph.max_nodes) {
        throw ContractError("graph: " + std::to_string(s.array->dims[0]) + " nodes exceed max_nodes " +
                            std::to_string(cfg.graph.max_nodes));
      }
      if (s.graph_timestep >= cfg.graph.t_slots) {
        throw ContractError("graph: timestep " + std::to_string(s.graph_timestep) + " outside t_slots " +
                            std::to_string(cfg.graph.t_slots));
      }
      break;
    case Modality::Oblique:
      need_array(4, "views x C x H x W");
      if (s.array->dims[0] < 2) {
        throw ContractError("oblique: need at least 2 views, got " + std::to_string(s.array->dims[0]));
      }
      if (s.array->dims[0] > cfg.oblique.max_views) {
        throw ContractError("oblique: views exceed max_views " + std::to_string(cfg.oblique.max_views));
      }
      if (s.array->dims[1] != 3) throw ShapeError("oblique: expected 3 channels, got " + dims_str(s.array->dims));
      check_patch_divisible(s.array->dims[2], s.array->dims[3], cfg.oblique.patch, "oblique");
      break;
    case Modality::Video:
      need_array(4, "T x C x H x W");
      if (s.array->dims[1] != cfg.video.channels) {
        throw ShapeError("video: expected " + std::to_string(cfg.video.channels) + " channels, got " +
                         dims_str(s.array->dims));
      }
      tube_count(s.array->dims, cfg.video.tube);  // validates extents
      break;
    case Modality::PointCloud:
      need_array(2, "K x (3 + d_feat)");
      if (s.array->dims[1] < 3) throw ShapeError("pointcloud: need at least xyz, got " + dims_str(s.array->dims));
      if (s.array->dims[0] < cfg.pointcloud.groups) {
        throw ContractError("pointcloud: K=" + std::to_string(s.array->dims[0]) + " smaller than G=" +
                            std::to_string(cfg.pointcloud.groups));
      }
      if (s.array->dims[0] < cfg.pointcloud.group_size) {
        throw ContractError("pointcloud: K=" + std::to_string(s.array->dims[0]) + " smaller than group size " +
                            std::to_string(cfg.pointcloud.group_size));
      }
      break;
  }
}

std::size_t token_count(const EncoderConfig& cfg, const ModalitySample& s) {
  validate_sample(cfg, s);
  switch (s.tag) {
    case Modality::Text:
    case Modality::Code:
      return s.text.size();
    case Modality::Rgb:
      return (s.array->dims[0] / cfg.rgb.patch) * (s.array->dims[1] / cfg.rgb.patch);
    case Modality::Msi:
      return (s.array->dims[0] / cfg.msi.patch) * (s.array->dims[1] / cfg.msi.patch);
    case Modality::Hsi:
      return 1;
    case Modality::Table:
      return cfg.table.columns.size();
    case Modality::Trajectory:
      return s.array->dims[0];
    case Modality::Sar: {
      auto shp = conv_plan_shape(2, s.array->dims[0], s.array->dims[1], cfg.sar.conv);
      return shp[1] * shp[2];
    }
    case Modality::Infrared: {
      auto shp = conv_plan_shape(3, s.array->dims[1], s.array->dims[2], cfg.infrared.conv);
      return 2 * shp[1] * shp[2];
    }
    case Modality::Graph:
      return 3 * s.array->dims[0];
    case Modality::Oblique:
      return s.array->dims[0] * (s.array->dims[2] / cfg.oblique.patch) * (s.array->dims[3] / cfg.oblique.patch);
    case Modality::Video:
      return tube_count(s.array->dims, cfg.video.tube);
    case Modality::PointCloud:
      return cfg.pointcloud.groups;
  }
  throw ContractError("bad modality");
}

std::size_t tube_count(const std::vector<std::size_t>& dims, const TubeSpec& spec) {
  if (dims.size() != 4) throw ShapeError("video payload must be T x C x H x W, got " + dims_str(dims));
  const std::size_t T = dims[0], H = dims[2], W = dims[3];
  if (spec.st == 0 || spec.sh == 0 || spec.sw == 0) throw ContractError("tube strides must be positive");
  if (spec.t == 0 || spec.h == 0 || spec.w == 0) throw ContractError("tube extents must be positive");
  if (spec.ot + spec.t > T || spec.oh + spec.h > H || spec.ow + spec.w > W) {
    throw ContractError("tube spec exceeds video extents " + dims_str(dims));
  }
  const std::size_t nt = (T - spec.ot - spec.t) / spec.st + 1;
  const std::size_t nh = (H - spec.oh - spec.h) / spec.sh + 1;
  const std::size_t nw = (W - spec.ow - spec.w) / spec.sw + 1;
  return nt * nh * nw;
}

TensorPtr extract_tubes(const Tensor& video, const TubeSpec& spec) {
  const std::size_t n = tube_count(video.dims, spec);
  const std::size_t T = video.dims[0], C = video.dims[1], H = video.dims[2], W = video.dims[3];
  const std::size_t nt = (T - spec.ot - spec.t) / spec.st + 1;
  const std::size_t nh = (H - spec.oh - spec.h) / spec.sh + 1;
  const std::size_t nw = (W - spec.ow - spec.w) / spec.sw + 1;
  const std::size_t flat = spec.t * C * spec.h * spec.w;
  auto out = Tensor::make({n, flat}, video.dtype, false);
  std::size_t row = 0;
  for (std::size_t it = 0; it < nt; ++it)
    for (std::size_t ih = 0; ih < nh; ++ih)
      for (std::size_t iw = 0; iw < nw; ++iw, ++row) {
        const std::size_t t0 = spec.ot + it * spec.st;
        const std::size_t h0 = spec.oh + ih * spec.sh;
        const std::size_t w0 = spec.ow + iw * spec.sw;
        std::size_t k = 0;
        for (std::size_t dt = 0; dt < spec.t; ++dt)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t dh = 0; dh < spec.h; ++dh)
              for (std::size_t dw = 0; dw < spec.w; ++dw, ++k) {
                out->data[row * flat + k] = video.data[(((t0 + dt) * C + c) * H + h0 + dh) * W + w0 + dw];
              }
      }
  return out;
}

PointGroups group_points(const Tensor& cloud, std::size_t G, std::size_t N_pts) {
  if (cloud.dims.size() != 2 || cloud.dims[1] < 3) {
    throw ShapeError("group_points: cloud must be K x (3 + d_feat), got " + dims_str(cloud.dims));
  }
  const std::size_t K = cloud.dims[0], stride = cloud.dims[1];
  if (K < G) throw ContractError("group_points: K=" + std::to_string(K) + " < G=" + std::to_string(G));
  if (K < N_pts) throw ContractError("group_points: K=" + std::to_string(K) + " < N_pts=" + std::to_string(N_pts));

  // canonicalize: lexicographic sort over full rows
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t j = 0; j < stride; ++j) {
      const double va = cloud.data[a * stride + j], vb = cloud.data[b * stride + j];
      if (va != vb) return va < vb;
    }
    return false;
  });
  std::vector<double> pts(K * 3);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < 3; ++j) pts[i * 3 + j] = cloud.data[order[i] * stride + j];

  auto d2 = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = pts[a * 3 + j] - pts[b * 3 + j];
      acc += d * d;
    }
    return acc;
  };

  // farthest point sampling from the lexicographically smallest point
  std::vector<std::size_t> centers;
  centers.reserve(G);
  centers.push_back(0);
  std::vector<double> dist(K);
  for (std::size_t i = 0; i < K; ++i) dist[i] = d2(i, 0);
  while (centers.size() < G) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < K; ++i) {
      if (dist[i] > dist[best]) best = i;
    }
    centers.push_back(best);
    for (std::size_t i = 0; i < K; ++i) dist[i] = std::min(dist[i], d2(i, best));
  }

  auto groups = Tensor::make({G, N_pts, 3}, cloud.dtype, false);
  auto centroids = Tensor::make({G, 3}, cloud.dtype, false);
  std::vector<std::size_t> idx(K);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t c = centers[g];
    for (std::size_t j = 0; j < 3; ++j) centroids->data[g * 3 + j] = pts[c * 3 + j];
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + N_pts, idx.end(), [&](std::size_t a, std::size_t b) {
      const double da = d2(a, c), db = d2(b, c);
      if (da != db) return da < db;
      return a < b;
    });
    for (std::size_t i = 0; i < N_pts; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        groups->data[(g * N_pts + i) * 3 + j] = pts[idx[i] * 3 + j] - pts[c * 3 + j];
  }
  groups->quantize();
  centroids->quantize();
  return {groups, centroids};
}

void init_encoder_stack(ParamStore& store, const std::string& prefix, std::size_t depth, std::size_t d,
                        std::size_t heads, std::size_t ffn_expansion, Dtype dt, Rng& rng, bool frozen) {
  if (depth == 0) throw ContractError("encoder stack depth must be >= 1");
  if (d % heads != 0) {
    throw ContractError("width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t f = d * ffn_expansion;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string lp = prefix + "l" + std::to_string(i) + ".";
    for (const char* ln : {"ln1.", "ln2."}) {
      auto g = store.create(lp + ln + "g", {d}, dt, frozen);
      init_ones(*g);
      auto b = store.create(lp + ln + "b", {d}, dt, frozen);
      init_zeros(*b);
    }
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      auto W = store.create(lp + w, {d, d}, dt, frozen);
      init_xavier(*W, rng, d, d);
    }
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) {
      init_zeros(*store.create(lp + b, {d}, dt, frozen));
    }
    auto w1 = store.create(lp + "ffn.w1", {f, d}, dt, frozen);
    init_xavier(*w1, rng, d, f);
    init_zeros(*store.create(lp + "ffn.b1", {f}, dt, frozen));
    auto w2 = store.create(lp + "ffn.w2", {d, f}, dt, frozen);
    init_xavier(*w2, rng, f, d);
    init_zeros(*store.create(lp + "ffn.b2", {d}, dt, frozen));
  }
  auto g = store.create(prefix + "lnf.g", {d}, dt, frozen);
  init_ones(*g);
  init_zeros(*store.create(prefix + "lnf.b", {d}, dt, frozen));
}

TensorPtr self_attention(const TensorPtr& x, const TensorPtr& wq, const TensorPtr& bq, const TensorPtr& wk,
                         const TensorPtr& bk, const TensorPtr& wv, const TensorPtr& bv, const TensorPtr& wo,
                         const TensorPtr& bo, std::size_t heads, bool causal) {
  const std::size_t d = x->dims[1];
  const std::size_t hd = d / heads;
  auto q = linear(x, wq, bq);
  auto k = linear(x, wk, bk);
  auto v = linear(x, wv, bv);
  std::vector<TensorPtr> outs;
  outs.reserve(heads);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * hd, hd);
    auto kh = slice_cols(k, h * hd, hd);
    auto vh = slice_cols(v, h * hd, hd);
    auto scores = scale(matmul(qh, transpose(kh)), inv_scale);
    auto att = causal ? softmax_rows_causal(scores) : softmax_rows(scores);
    outs.push_back(matmul(att, vh));
  }
  auto merged = heads == 1 ? outs[0] : concat(outs, 1);
  return linear(merged, wo, bo);
}

TensorPtr encoder_stack_forward(const ParamStore& store, const std::string& prefix, std::size_t depth,
                                std::size_t heads, const TensorPtr& x_in) {
  TensorPtr x = x_in;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string lp = prefix + "l" + std::to_string(i) + ".";
    auto h = layer_norm(x, store.get(lp + "ln1.g"), store.get(lp + "ln1.b"));
    auto a = self_attention(h, store.get(lp + "attn.wq"), store.get(lp + "attn.bq"), store.get(lp + "attn.wk"),
                            store.get(lp + "attn.bk"), store.get(lp + "attn.wv"), store.get(lp + "attn.bv"),
                            store.get(lp + "attn.wo"), store.get(lp + "attn.bo"), heads, false);
    x = add(x, a);
    auto h2 = layer_norm(x, store.get(lp + "ln2.g"), store.get(lp + "ln2.b"));
    auto f = linear(gelu(linear(h2, store.get(lp + "ffn.w1"), store.get(lp + "ffn.b1"))), store.get(lp + "ffn.w2"),
                    store.get(lp + "ffn.b2"));
    x = add(x, f);
  }
  return layer_norm(x, store.get(prefix + "lnf.g"), store.get(prefix + "lnf.b"));
}

void init_encoder_params(ParamStore& store, const EncoderConfig& cfg, Modality m, Dtype dt, Rng& rng) {
  const std::string p = enc_prefix(m);
  switch (m) {
    case Modality::Text:
    case Modality::Code: {
      const std::size_t d = m == Modality::Text ? cfg.text.d : cfg.code.d;
      auto emb = store.create(p + "emb", {tok::kVocab, d}, dt, false);
      init_normal(*emb, rng, 0.05);
      init_pos(store, p, cfg, d, dt, rng, false);
      break;
    }
    case Modality::Rgb: {
      const bool fr = cfg.rgb.frozen;
      init_patch_embed(store, p, 3, cfg.rgb.patch, cfg.rgb.d, dt, rng, fr);
      init_pos(store, p, cfg, cfg.rgb.d, dt, rng, fr);
      init_encoder_stack(store, p + "stack.", cfg.rgb.depth, cfg.rgb.d, cfg.heads, cfg.ffn_expansion, dt, rng, fr);
      break;
    }
    case Modality::Msi:
      init_patch_embed(store, p, cfg.msi.channels, cfg.msi.patch, cfg.msi.d, dt, rng, false);
      init_pos(store, p, cfg, cfg.msi.d, dt, rng, false);
      init_encoder_stack(store, p + "stack.", cfg.msi.depth, cfg.msi.d, cfg.heads, cfg.ffn_expansion, dt, rng,
                         false);
      break;
    case Modality::Hsi: {
      auto w = store.create(p + "proj.w", {cfg.hsi.d, cfg.hsi.bands}, dt, false);
      init_xavier(*w, rng, cfg.hsi.bands, cfg.hsi.d);
      init_zeros(*store.create(p + "proj.b", {cfg.hsi.d}, dt, false));
      init_encoder_stack(store, p + "stack.", cfg.hsi.depth, cfg.hsi.d, cfg.heads, cfg.ffn_expansion, dt, rng,
                         false);
      break;
    }
    case Modality::Table: {
      for (std::size_t j = 0; j < cfg.table.columns.size(); ++j) {
        const auto& col = cfg.table.columns[j];
        const std::size_t vocab = col.discrete ? col.vocab : col.bin_edges.size() + 1;
        if (vocab == 0) throw ContractError("table column " + std::to_string(j) + " has empty vocabulary");
        auto emb = store.create(p + "col" + std::to_string(j) + ".emb", {vocab, cfg.table.d}, dt, false);
        init_normal(*emb, rng, 0.05);
      }
      init_encoder_stack(store, p + "stack.", cfg.table.depth, cfg.table.d, cfg.heads, cfg.ffn_expansion, dt, rng,
                         false);
      break;
    }
    case Modality::Trajectory: {
      auto w = store.create(p + "proj.w", {cfg.trajectory.d, 2}, dt, false);
      init_xavier(*w, rng, 2, cfg.trajectory.d);
      init_zeros(*store.create(p + "proj.b", {cfg.trajectory.d}, dt, false));
      init_pos(store, p, cfg, cfg.trajectory.d, dt, rng, false);
      init_encoder_stack(store, p + "stack.", cfg.trajectory.depth, cfg.trajectory.d, cfg.heads, cfg.ffn_expansion,
                         dt, rng, false);
      break;
    }
    case Modality::Sar:
      if (cfg.sar.conv.empty() || cfg.sar.conv.back().out_channels != cfg.sar.d) {
        throw ContractError("sar conv plan must end at width d");
      }
      init_conv_plan(store, p, 2, cfg.sar.conv, dt, rng, false);
      init_pos(store, p, cfg, cfg.sar.d, dt, rng, false);
      break;
    case Modality::Infrared:
      if (cfg.infrared.conv.empty() || cfg.infrared.conv.back().out_channels != cfg.infrared.d) {
        throw ContractError("infrared conv plan must end at width d");
      }
      // two independently parameterized branches
      init_conv_plan(store, p + "r.", 3, cfg.infrared.conv, dt, rng, false);
      init_conv_plan(store, p + "i.", 3, cfg.infrared.conv, dt, rng, false);
      init_pos(store, p, cfg, cfg.infrared.d, dt, rng, false);
      break;
    case Modality::Graph: {
      auto w = store.create(p + "proj.w", {cfg.graph.d, cfg.graph.node_dim}, dt, false);
      init_xavier(*w, rng, cfg.graph.node_dim, cfg.graph.d);
      init_zeros(*store.create(p + "proj.b", {cfg.graph.d}, dt, false));
      auto sp = store.create(p + "spatial.emb", {cfg.graph.max_nodes, cfg.graph.d}, dt, false);
      init_normal(*sp, rng, 0.05);
      auto te = store.create(p + "time.emb", {cfg.graph.t_slots, cfg.graph.d}, dt, false);
      init_normal(*te, rng, 0.05);
      break;
    }
    case Modality::Oblique:
      init_patch_embed(store, p, 3, cfg.oblique.patch, cfg.oblique.d, dt, rng, false);
      init_pos(store, p, cfg, cfg.oblique.d, dt, rng, false);
      {
        auto ve = store.create(p + "view.emb", {cfg.oblique.max_views, cfg.oblique.d}, dt, false);
        init_normal(*ve, rng, 0.05);
      }
      init_encoder_stack(store, p + "stack.", cfg.oblique.depth, cfg.oblique.d, cfg.heads, cfg.ffn_expansion, dt,
                         rng, false);
      break;
    case Modality::Video: {
      const std::size_t flat = cfg.video.tube.t * cfg.video.channels * cfg.video.tube.h * cfg.video.tube.w;
      auto w = store.create(p + "proj.w", {cfg.video.d, flat}, dt, false);
      init_xavier(*w, rng, flat, cfg.video.d);
      init_zeros(*store.create(p + "proj.b", {cfg.video.d}, dt, false));
      init_pos(store, p, cfg, cfg.video.d, dt, rng, false);
      init_encoder_stack(store, p + "stack.", cfg.video.depth, cfg.video.d, cfg.heads, cfg.ffn_expansion, dt, rng,
                         false);
      break;
    }
    case Modality::PointCloud: {
      auto w1 = store.create(p + "conv1.w", {cfg.pointcloud.d, 3, 1}, dt, false);
      init_xavier(*w1, rng, 3, cfg.pointcloud.d);
      init_zeros(*store.create(p + "conv1.b", {cfg.pointcloud.d}, dt, false));
      auto w2 = store.create(p + "conv2.w", {cfg.pointcloud.d, cfg.pointcloud.d, 1}, dt, false);
      init_xavier(*w2, rng, cfg.pointcloud.d, cfg.pointcloud.d);
      init_zeros(*store.create(p + "conv2.b", {cfg.pointcloud.d}, dt, false));
      auto wc = store.create(p + "cen.w", {cfg.pointcloud.d, 3}, dt, false);
      init_xavier(*wc, rng, 3, cfg.pointcloud.d);
      init_zeros(*store.create(p + "cen.b", {cfg.pointcloud.d}, dt, false));
      init_encoder_stack(store, p + "stack.", cfg.pointcloud.depth, cfg.pointcloud.d, cfg.heads, cfg.ffn_expansion,
                         dt, rng, false);
      break;
    }
  }
}

TokenSequence encode(const ModalitySample& s, const EncoderConfig& cfg, const ParamStore& store) {
  validate_sample(cfg, s);
  const std::string p = enc_prefix(s.tag);
  if (!store.has_prefix(p)) {
    throw ContractError(std::string("encoder parameters not initialized for ") + modality_name(s.tag));
  }
  const Dtype dt = store.entries().begin()->second.tensor->dtype;
  TensorPtr tokens;
  switch (s.tag) {
    case Modality::Text:
    case Modality::Code: {
      auto ids = tok::tokenize(s.text);
      tokens = add_positions(store, p, cfg, embedding_lookup(store.get(p + "emb"), ids));
      break;
    }
    case Modality::Rgb: {
      auto x = patch_embed(store, p, cfg.rgb.patch, with_dtype(*hwc_to_chw(*s.array), dt));
      x = add_positions(store, p, cfg, x);
      tokens = encoder_stack_forward(store, p + "stack.", cfg.rgb.depth, cfg.heads, x);
      break;
    }
    case Modality::Msi: {
      auto x = patch_embed(store, p, cfg.msi.patch, with_dtype(*hwc_to_chw(*s.array), dt));
      x = add_positions(store, p, cfg, x);
      tokens = encoder_stack_forward(store, p + "stack.", cfg.msi.depth, cfg.heads, x);
      break;
    }
    case Modality::Hsi: {
      auto row = with_dtype(*reshape(std::make_shared<Tensor>(*s.array), {1, cfg.hsi.bands}), dt);
      auto x = linear(row, store.get(p + "proj.w"), store.get(p + "proj.b"));
      tokens = encoder_stack_forward(store, p + "stack.", cfg.hsi.depth, cfg.heads, x);
      break;
    }
    case Modality::Table: {
      std::vector<TensorPtr> rows;
      rows.reserve(cfg.table.columns.size());
      for (std::size_t j = 0; j < cfg.table.columns.size(); ++j) {
        const auto& col = cfg.table.columns[j];
        const double v = s.array->data[j];
        const std::size_t id = col.discrete ? static_cast<std::size_t>(v) : continuous_bin(col.bin_edges, v);
        rows.push_back(embedding_lookup(store.get(p + "col" + std::to_string(j) + ".emb"), {id}));
      }
      auto x = concat(rows, 0);
      tokens = encoder_stack_forward(store, p + "stack.", cfg.table.depth, cfg.heads, x);
      break;
    }
    case Modality::Trajectory: {
      auto x = linear(with_dtype(*s.array, dt), store.get(p + "proj.w"), store.get(p + "proj.b"));
      x = add_positions(store, p, cfg, x);
      tokens = encoder_stack_forward(store, p + "stack.", cfg.trajectory.depth, cfg.heads, x);
      break;
    }
    case Modality::Sar: {
      auto fm = conv_plan_forward(store, p, cfg.sar.conv, with_dtype(*hwc_to_chw(*s.array), dt));
      tokens = add_positions(store, p, cfg, feature_map_to_tokens(fm));
      break;
    }
    case Modality::Infrared: {
      const std::size_t H = s.array->dims[1], W = s.array->dims[2];
      auto split_branch = [&](std::size_t which) {
        auto img = Tensor::make({H, W, 3}, s.array->dtype, false);
        std::copy(s.array->data.begin() + which * H * W * 3, s.array->data.begin() + (which + 1) * H * W * 3,
                  img->data.begin());
        return with_dtype(*hwc_to_chw(*img), dt);
      };
      auto tr = feature_map_to_tokens(conv_plan_forward(store, p + "r.", cfg.infrared.conv, split_branch(0)));
      auto ti = feature_map_to_tokens(conv_plan_forward(store, p + "i.", cfg.infrared.conv, split_branch(1)));
      tokens = add_positions(store, p, cfg, concat({tr, ti}, 0));
      break;
    }
    case Modality::Graph: {
      const std::size_t K = s.array->dims[0];
      auto proj = linear(with_dtype(*s.array, dt), store.get(p + "proj.w"), store.get(p + "proj.b"));
      std::vector<std::size_t> node_ids(K);
      std::iota(node_ids.begin(), node_ids.end(), 0);
      auto spatial = embedding_lookup(store.get(p + "spatial.emb"), node_ids);
      auto timev = embedding_lookup(store.get(p + "time.emb"),
                                    std::vector<std::size_t>(K, s.graph_timestep));
      tokens = concat({proj, spatial, timev}, 0);
      break;
    }
    case Modality::Oblique: {
      const std::size_t views = s.array->dims[0], C = s.array->dims[1], H = s.array->dims[2], W = s.array->dims[3];
      std::vector<TensorPtr> per_view;
      per_view.reserve(views);
      for (std::size_t v = 0; v < views; ++v) {
        auto img = Tensor::make({C, H, W}, s.array->dtype, false);
        std::copy(s.array->data.begin() + v * C * H * W, s.array->data.begin() + (v + 1) * C * H * W,
                  img->data.begin());
        auto x = patch_embed(store, p, cfg.oblique.patch, with_dtype(*img, dt));
        x = add_positions(store, p, cfg, x);
        auto ve = embedding_lookup(store.get(p + "view.emb"), std::vector<std::size_t>(x->dims[0], v));
        x = encoder_stack_forward(store, p + "stack.", cfg.oblique.depth, cfg.heads, add(x, ve));
        per_view.push_back(x);
      }
      tokens = concat(per_view, 0);
      break;
    }
    case Modality::Video: {
      auto tubes = with_dtype(*extract_tubes(*s.array, cfg.video.tube), dt);
      auto x = linear(tubes, store.get(p + "proj.w"), store.get(p + "proj.b"));
      x = add_positions(store, p, cfg, x);
      tokens = encoder_stack_forward(store, p + "stack.", cfg.video.depth, cfg.heads, x);
      break;
    }
    case Modality::PointCloud: {
      auto grouped = group_points(*s.array, cfg.pointcloud.groups, cfg.pointcloud.group_size);
      const std::size_t G = cfg.pointcloud.groups, N = cfg.pointcloud.group_size;
      std::vector<TensorPtr> feats;
      feats.reserve(G);
      for (std::size_t g = 0; g < G; ++g) {
        auto sig = Tensor::make({N, 3}, grouped.groups->dtype, false);
        std::copy(grouped.groups->data.begin() + g * N * 3, grouped.groups->data.begin() + (g + 1) * N * 3,
                  sig->data.begin());
        // points as a length-N signal with xyz channels
        auto chan = transpose(with_dtype(*sig, dt));
        auto f = conv1d(chan, store.get(p + "conv1.w"), store.get(p + "conv1.b"), 1, 0);
        f = conv1d(gelu(f), store.get(p + "conv2.w"), store.get(p + "conv2.b"), 1, 0);
        feats.push_back(transpose(mean_pool(f, 1)));
      }
      auto group_feats = concat(feats, 0);
      auto cen = linear(with_dtype(*grouped.centroids, dt), store.get(p + "cen.w"), store.get(p + "cen.b"));
      tokens = encoder_stack_forward(store, p + "stack.", cfg.pointcloud.depth, cfg.heads, add(group_feats, cen));
      break;
    }
  }
  const std::size_t expect_n = token_count(cfg, s);
  if (tokens->dims[0] != expect_n || tokens->dims[1] != encoder_width(cfg, s.tag)) {
    throw ShapeError(std::string(modality_name(s.tag)) + ": encoder produced " + dims_str(tokens->dims) +
                     ", formula says " + std::to_string(expect_n) + "x" +
                     std::to_string(encoder_width(cfg, s.tag)));
  }
  return TokenSequence{tokens, s.tag};
}

}  // namespace allspark
