#pragma once

#include "allspark/params.hpp"

namespace allspark {

enum class Modality {
  Text,
  Code,
  Rgb,
  Msi,
  Hsi,
  Table,
  Trajectory,
  Sar,
  Infrared,
  Graph,
  Oblique,
  Video,
  PointCloud,
};

constexpr std::size_t kModalityCount = 13;
const std::vector<Modality>& all_modalities();
const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

/// Raw input for one modality. `array` carries every array-shaped payload
/// with a documented dim order per tag:
///   Rgb/Msi/Sar  H x W x C      Hsi        1 x 1 x C
///   Infrared     2 x H x W x 3  Graph      K x d_node (+ timestep field)
///   Oblique      views x C x H x W
///   Video        T x C x H x W  PointCloud K x (3 + d_feat)
///   Trajectory   l x 2          Table      1 x columns
/// Text/Code use the `text` field instead.
struct ModalitySample {
  Modality tag = Modality::Text;
  TensorPtr array;
  std::string text;
  std::size_t graph_timestep = 0;
};

struct TokenSequence {
  TensorPtr tokens;  // n x d
  Modality modality = Modality::Text;
  std::size_t n() const { return tokens->dims[0]; }
  std::size_t d() const { return tokens->dims[1]; }
};

struct ConvLayerSpec {
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t pad;
};

/// Space-time tube grid: extents, strides and origin offsets per axis.
struct TubeSpec {
  std::size_t t = 2, h = 4, w = 4;
  std::size_t st = 2, sh = 4, sw = 4;
  std::size_t ot = 0, oh = 0, ow = 0;
};

struct ColumnSpec {
  bool discrete = false;
  std::size_t vocab = 0;            // discrete columns
  std::vector<double> bin_edges;    // continuous columns; 15 edges -> 16 bins
};

struct EncoderConfig {
  std::size_t heads = 2;
  std::size_t ffn_expansion = 4;
  std::size_t max_tokens = 256;  // positional table length

  // Text/code have no encoder stack: the tokenizer plus a byte embedding
  // stands in for the upstream text path.
  struct {
    std::size_t d = 32;
  } text, code;
  struct {
    std::size_t d = 32, depth = 2, patch = 8;
    bool frozen = true;
  } rgb;
  struct {
    std::size_t d = 24, depth = 2, patch = 8, channels = 8;
  } msi;
  struct {
    std::size_t d = 48, depth = 2, bands = 103;
  } hsi;
  struct {
    std::size_t d = 16, depth = 1;
    std::vector<ColumnSpec> columns;
  } table;
  struct {
    std::size_t d = 16, depth = 2;
  } trajectory;
  struct {
    std::size_t d = 24;
    std::vector<ConvLayerSpec> conv;
  } sar;
  struct {
    std::size_t d = 24;
    std::vector<ConvLayerSpec> conv;
  } infrared;
  struct {
    std::size_t d = 48, node_dim = 8, t_slots = 32, max_nodes = 64;
  } graph;
  struct {
    std::size_t d = 16, depth = 2, patch = 8, max_views = 8;
  } oblique;
  struct {
    std::size_t d = 40, depth = 2, channels = 3;
    TubeSpec tube;
  } video;
  struct {
    std::size_t d = 32, depth = 2, groups = 8, group_size = 16;
  } pointcloud;
};

/// Desk defaults: every width <= 64 and depth <= 2.
EncoderConfig desk_encoder_config();
/// Same widths, stack depths as printed in the source architecture
/// descriptions (RGB 40, HSI/PointCloud/Oblique 12, Video 6, Trajectory 2,
/// Table 1). Shape formulas do not depend on depth.
EncoderConfig paper_encoder_config();

std::size_t encoder_width(const EncoderConfig& cfg, Modality m);

/// Documented token-count formula per modality, evaluated from the sample
/// alone. Encoders must produce exactly this many tokens.
std::size_t token_count(const EncoderConfig& cfg, const ModalitySample& sample);

/// Validates the payload against the tag contract; throws on violation.
void validate_sample(const EncoderConfig& cfg, const ModalitySample& sample);

/// Creates the parameter tensors for one modality encoder under
/// "encoder.<name>." in the store.
void init_encoder_params(ParamStore& store, const EncoderConfig& cfg, Modality m, Dtype dt, Rng& rng);

/// f_i of the pipeline: raw sample -> token sequence [n x d_i].
TokenSequence encode(const ModalitySample& sample, const EncoderConfig& cfg, const ParamStore& store);

/// Point grouping: canonicalize by lexicographic row sort, farthest-point
/// sample G centroids starting from the smallest point, then take the
/// N_pts nearest neighbours of each centroid re-centered on it.
struct PointGroups {
  TensorPtr groups;     // G x N_pts x 3
  TensorPtr centroids;  // G x 3
};
PointGroups group_points(const Tensor& cloud, std::size_t G, std::size_t N_pts);

/// Deterministic space-time tube grid; each row is one flattened tube.
TensorPtr extract_tubes(const Tensor& video, const TubeSpec& spec);
std::size_t tube_count(const std::vector<std::size_t>& video_dims, const TubeSpec& spec);

/// Transformer encoder stack shared by the attention-based encoders.
/// Parameters live under `prefix` ("<prefix>.l<i>." per layer).
void init_encoder_stack(ParamStore& store, const std::string& prefix, std::size_t depth, std::size_t d,
                        std::size_t heads, std::size_t ffn_expansion, Dtype dt, Rng& rng, bool frozen);
TensorPtr encoder_stack_forward(const ParamStore& store, const std::string& prefix, std::size_t depth,
                                std::size_t heads, const TensorPtr& x);

/// Multi-head scaled-dot self-attention over x [n x d].
TensorPtr self_attention(const TensorPtr& x, const TensorPtr& wq, const TensorPtr& bq, const TensorPtr& wk,
                         const TensorPtr& bk, const TensorPtr& wv, const TensorPtr& bv, const TensorPtr& wo,
                         const TensorPtr& bo, std::size_t heads, bool causal);

}  // namespace allspark
