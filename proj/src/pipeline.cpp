#include "allspark/pipeline.hpp"

#include <json.hpp>

#include "allspark/ops.hpp"
#include "allspark/tokenizer.hpp"

namespace allspark {

using nlohmann::json;

namespace {
const char* kTaskNames[] = {"classify", "regress", "trajectory-predict", "text-generate", "depth"};
}

const char* task_name(TaskKind t) { return kTaskNames[static_cast<int>(t)]; }

TaskKind task_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    if (name == kTaskNames[i]) return static_cast<TaskKind>(i);
  }
  throw ContractError("unknown task: " + name);
}

TaskKind default_task(Modality m) {
  switch (m) {
    case Modality::Text: return TaskKind::Classify;
    case Modality::Code: return TaskKind::TextGenerate;
    case Modality::Table: return TaskKind::Regress;
    case Modality::Graph: return TaskKind::Regress;
    case Modality::Trajectory: return TaskKind::TrajectoryPredict;
    case Modality::Oblique: return TaskKind::Depth;
    default: return TaskKind::Classify;
  }
}

PipelineConfig make_pipeline_config(Modality m, TaskKind task, const std::string& preset, std::uint64_t seed) {
  if (preset != "desk" && preset != "paper") throw ContractError("preset must be desk or paper");
  PipelineConfig cfg;
  cfg.modality = m;
  cfg.task = task;
  cfg.preset = preset;
  cfg.seed = seed;
  cfg.enc = preset == "paper" ? paper_encoder_config() : desk_encoder_config();
  cfg.bridge.queries = 8;
  cfg.bridge.dim = preset == "paper" ? kPaperLanguageDim : 64;
  cfg.bridge.hidden = cfg.bridge.dim;
  cfg.bridge.layers = 1;
  cfg.backbone.dim = cfg.bridge.dim;
  cfg.backbone.blocks = 2;
  cfg.backbone.heads = 4;
  cfg.backbone.context = 256;  // the longest registry prompt exceeds 128
  cfg.backbone.adapter_rank = 8;
  cfg.backbone.vocab = tok::kVocab;
  cfg.head.pooling = Pooling::LastToken;
  switch (task) {
    case TaskKind::Classify:
      cfg.head.kind = HeadKind::Classify;
      cfg.head.num_classes = m == Modality::Text ? 2 : 4;
      break;
    case TaskKind::Regress:
      cfg.head.kind = HeadKind::Regress;
      break;
    case TaskKind::TrajectoryPredict:
      cfg.head.kind = HeadKind::DepthRegress;
      cfg.head.out_h = 4;  // T_pred
      cfg.head.out_w = 2;
      break;
    case TaskKind::Depth:
      cfg.head.kind = HeadKind::DepthRegress;
      cfg.head.out_h = 4;
      cfg.head.out_w = 4;
      break;
    case TaskKind::TextGenerate:
      cfg.head.kind = HeadKind::TextDecode;
      break;
  }
  return cfg;
}

Pipeline Pipeline::build(const PipelineConfig& cfg, PromptRegistry registry) {
  if (cfg.bridge.dim != cfg.backbone.dim) {
    throw ContractError("pipeline: bridge D and backbone dim must agree");
  }
  if (cfg.backbone.vocab != tok::kVocab) {
    throw ContractError("pipeline: backbone vocab must match the tokenizer");
  }
  Pipeline p;
  p.cfg_ = cfg;
  p.registry_ = std::move(registry);
  Rng rng(cfg.seed);
  init_encoder_params(p.store_, cfg.enc, cfg.modality, cfg.dtype, rng);
  init_bridge_params(p.store_, cfg.bridge, encoder_width(cfg.enc, cfg.modality), cfg.dtype, rng);
  init_backbone_params(p.store_, cfg.backbone, cfg.dtype, rng);
  init_head_params(p.store_, cfg.head, cfg.backbone.dim, cfg.dtype, rng);
  return p;
}

Pipeline Pipeline::restore(const PipelineConfig& cfg, PromptRegistry registry, ParamStore store) {
  Pipeline p;
  p.cfg_ = cfg;
  p.registry_ = std::move(registry);
  p.store_ = std::move(store);
  return p;
}

Pipeline::ForwardTrace Pipeline::forward(const ModalitySample& sample, PromptMode mode, Rng& rng) const {
  if (sample.tag != cfg_.modality) {
    throw ContractError(std::string("pipeline built for ") + modality_name(cfg_.modality) + ", got " +
                        modality_name(sample.tag));
  }
  ForwardTrace t;
  t.tokens = encode(sample, cfg_.enc, store_);
  t.bridged = bridge_forward(store_, cfg_.bridge, t.tokens);
  const std::string prompt = select_prompt(registry_, cfg_.modality, mode, rng);
  t.assembled = assemble(store_, cfg_.backbone, t.bridged, tok::tokenize(prompt));
  t.hidden = backbone_forward(store_, cfg_.backbone, t.assembled);
  return t;
}

TensorPtr Pipeline::loss(const ModalitySample& sample, const Label& label, PromptMode mode, Rng& rng) const {
  if (cfg_.task == TaskKind::TextGenerate) {
    // teacher-forced next-token cross-entropy over [bos, target..., eos]
    auto tokens = encode(sample, cfg_.enc, store_);
    auto bridged = bridge_forward(store_, cfg_.bridge, tokens);
    const std::string prompt = select_prompt(registry_, cfg_.modality, mode, rng);
    auto prompt_ids = tok::tokenize(prompt);
    auto target_ids = tok::tokenize(label.text);
    std::vector<std::size_t> ids = prompt_ids;
    ids.push_back(tok::kBos);
    ids.insert(ids.end(), target_ids.begin(), target_ids.end());
    auto seq = assemble(store_, cfg_.backbone, bridged, ids);
    auto hidden = backbone_forward(store_, cfg_.backbone, seq);
    const std::size_t first = seq.boundary + prompt_ids.size();  // bos position
    auto rows = slice_rows(lm_logits(store_, hidden), first, target_ids.size() + 1);
    std::vector<std::size_t> next = target_ids;
    next.push_back(tok::kEos);
    return cross_entropy_rows(rows, next);
  }

  auto trace = forward(sample, mode, rng);
  auto out = head_forward(store_, cfg_.head, trace.hidden, trace.assembled.boundary);
  switch (cfg_.task) {
    case TaskKind::Classify:
      return cross_entropy_rows(out, {label.class_id});
    case TaskKind::Regress: {
      auto target = Tensor::from({1, 1}, {label.value}, cfg_.dtype);
      return mse(out, target);
    }
    case TaskKind::TrajectoryPredict:
    case TaskKind::Depth: {
      if (!label.grid) throw ContractError("loss: grid label missing");
      return mse(out, with_dtype(*label.grid, cfg_.dtype));
    }
    case TaskKind::TextGenerate:
      break;
  }
  throw ContractError("loss: bad task");
}

TensorPtr Pipeline::predict(const ModalitySample& sample) const {
  if (cfg_.task == TaskKind::TextGenerate) {
    throw ContractError("predict: text generation goes through generate()");
  }
  NoGradGuard off;
  Rng rng(0);  // eval prompts ignore the stream
  auto trace = forward(sample, PromptMode::Eval, rng);
  return head_forward(store_, cfg_.head, trace.hidden, trace.assembled.boundary);
}

std::string Pipeline::generate(const ModalitySample& sample, std::size_t max_len) const {
  NoGradGuard off;
  Rng rng(0);
  auto tokens = encode(sample, cfg_.enc, store_);
  auto bridged = bridge_forward(store_, cfg_.bridge, tokens);
  const std::string prompt = select_prompt(registry_, cfg_.modality, PromptMode::Eval, rng);
  auto ids = tok::tokenize(prompt);
  ids.push_back(tok::kBos);
  auto seq = assemble(store_, cfg_.backbone, bridged, ids);
  return tok::detokenize(decode_text(store_, cfg_.backbone, seq, max_len));
}

// ---------------------------------------------------------------- config IO

namespace {

json tube_to_json(const TubeSpec& t) {
  return {{"t", t.t}, {"h", t.h}, {"w", t.w}, {"st", t.st}, {"sh", t.sh},
          {"sw", t.sw}, {"ot", t.ot}, {"oh", t.oh}, {"ow", t.ow}};
}

TubeSpec tube_from_json(const json& j) {
  TubeSpec t;
  t.t = j.at("t");
  t.h = j.at("h");
  t.w = j.at("w");
  t.st = j.at("st");
  t.sh = j.at("sh");
  t.sw = j.at("sw");
  t.ot = j.at("ot");
  t.oh = j.at("oh");
  t.ow = j.at("ow");
  return t;
}

json conv_to_json(const std::vector<ConvLayerSpec>& plan) {
  json arr = json::array();
  for (const auto& l : plan) {
    arr.push_back({{"out", l.out_channels}, {"kernel", l.kernel}, {"stride", l.stride}, {"pad", l.pad}});
  }
  return arr;
}

std::vector<ConvLayerSpec> conv_from_json(const json& arr) {
  std::vector<ConvLayerSpec> plan;
  for (const auto& l : arr) plan.push_back({l.at("out"), l.at("kernel"), l.at("stride"), l.at("pad")});
  return plan;
}

json columns_to_json(const std::vector<ColumnSpec>& cols) {
  json arr = json::array();
  for (const auto& c : cols) {
    arr.push_back({{"discrete", c.discrete}, {"vocab", c.vocab}, {"bin_edges", c.bin_edges}});
  }
  return arr;
}

std::vector<ColumnSpec> columns_from_json(const json& arr) {
  std::vector<ColumnSpec> cols;
  for (const auto& c : arr) {
    ColumnSpec col;
    col.discrete = c.at("discrete");
    col.vocab = c.at("vocab");
    col.bin_edges = c.at("bin_edges").get<std::vector<double>>();
    cols.push_back(col);
  }
  return cols;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  const auto& e = cfg.enc;
  json j;
  j["modality"] = modality_name(cfg.modality);
  j["task"] = task_name(cfg.task);
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["dtype"] = dtype_name(cfg.dtype);
  j["enc"] = {
      {"heads", e.heads},
      {"ffn_expansion", e.ffn_expansion},
      {"max_tokens", e.max_tokens},
      {"text", {{"d", e.text.d}}},
      {"code", {{"d", e.code.d}}},
      {"rgb", {{"d", e.rgb.d}, {"depth", e.rgb.depth}, {"patch", e.rgb.patch}, {"frozen", e.rgb.frozen}}},
      {"msi", {{"d", e.msi.d}, {"depth", e.msi.depth}, {"patch", e.msi.patch}, {"channels", e.msi.channels}}},
      {"hsi", {{"d", e.hsi.d}, {"depth", e.hsi.depth}, {"bands", e.hsi.bands}}},
      {"table", {{"d", e.table.d}, {"depth", e.table.depth}, {"columns", columns_to_json(e.table.columns)}}},
      {"trajectory", {{"d", e.trajectory.d}, {"depth", e.trajectory.depth}}},
      {"sar", {{"d", e.sar.d}, {"conv", conv_to_json(e.sar.conv)}}},
      {"infrared", {{"d", e.infrared.d}, {"conv", conv_to_json(e.infrared.conv)}}},
      {"graph",
       {{"d", e.graph.d}, {"node_dim", e.graph.node_dim}, {"t_slots", e.graph.t_slots},
        {"max_nodes", e.graph.max_nodes}}},
      {"oblique",
       {{"d", e.oblique.d}, {"depth", e.oblique.depth}, {"patch", e.oblique.patch},
        {"max_views", e.oblique.max_views}}},
      {"video",
       {{"d", e.video.d}, {"depth", e.video.depth}, {"channels", e.video.channels},
        {"tube", tube_to_json(e.video.tube)}}},
      {"pointcloud",
       {{"d", e.pointcloud.d}, {"depth", e.pointcloud.depth}, {"groups", e.pointcloud.groups},
        {"group_size", e.pointcloud.group_size}}},
  };
  j["bridge"] = {{"queries", cfg.bridge.queries},
                 {"dim", cfg.bridge.dim},
                 {"hidden", cfg.bridge.hidden},
                 {"layers", cfg.bridge.layers},
                 {"ffn_expansion", cfg.bridge.ffn_expansion}};
  j["backbone"] = {{"dim", cfg.backbone.dim},
                   {"blocks", cfg.backbone.blocks},
                   {"heads", cfg.backbone.heads},
                   {"context", cfg.backbone.context},
                   {"adapter_rank", cfg.backbone.adapter_rank},
                   {"ffn_expansion", cfg.backbone.ffn_expansion},
                   {"vocab", cfg.backbone.vocab},
                   {"modal_prefix_full_attention", cfg.backbone.modal_prefix_full_attention}};
  j["head"] = {{"kind", static_cast<int>(cfg.head.kind)},
               {"pooling", cfg.head.pooling == Pooling::LastToken ? "last" : "mean_modal"},
               {"num_classes", cfg.head.num_classes},
               {"target_mean", cfg.head.target_mean},
               {"target_std", cfg.head.target_std},
               {"out_h", cfg.head.out_h},
               {"out_w", cfg.head.out_w}};
  return j.dump();
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError(std::string("bad pipeline config json: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.modality = modality_from_name(j.at("modality"));
  cfg.task = task_from_name(j.at("task"));
  cfg.preset = j.at("preset");
  cfg.seed = j.at("seed");
  cfg.dtype = j.at("dtype") == "f64" ? Dtype::F64 : Dtype::F32;
  const auto& je = j.at("enc");
  auto& e = cfg.enc;
  e.heads = je.at("heads");
  e.ffn_expansion = je.at("ffn_expansion");
  e.max_tokens = je.at("max_tokens");
  e.text.d = je.at("text").at("d");
  e.code.d = je.at("code").at("d");
  e.rgb.d = je.at("rgb").at("d");
  e.rgb.depth = je.at("rgb").at("depth");
  e.rgb.patch = je.at("rgb").at("patch");
  e.rgb.frozen = je.at("rgb").at("frozen");
  e.msi.d = je.at("msi").at("d");
  e.msi.depth = je.at("msi").at("depth");
  e.msi.patch = je.at("msi").at("patch");
  e.msi.channels = je.at("msi").at("channels");
  e.hsi.d = je.at("hsi").at("d");
  e.hsi.depth = je.at("hsi").at("depth");
  e.hsi.bands = je.at("hsi").at("bands");
  e.table.d = je.at("table").at("d");
  e.table.depth = je.at("table").at("depth");
  e.table.columns = columns_from_json(je.at("table").at("columns"));
  e.trajectory.d = je.at("trajectory").at("d");
  e.trajectory.depth = je.at("trajectory").at("depth");
  e.sar.d = je.at("sar").at("d");
  e.sar.conv = conv_from_json(je.at("sar").at("conv"));
  e.infrared.d = je.at("infrared").at("d");
  e.infrared.conv = conv_from_json(je.at("infrared").at("conv"));
  e.graph.d = je.at("graph").at("d");
  e.graph.node_dim = je.at("graph").at("node_dim");
  e.graph.t_slots = je.at("graph").at("t_slots");
  e.graph.max_nodes = je.at("graph").at("max_nodes");
  e.oblique.d = je.at("oblique").at("d");
  e.oblique.depth = je.at("oblique").at("depth");
  e.oblique.patch = je.at("oblique").at("patch");
  e.oblique.max_views = je.at("oblique").at("max_views");
  e.video.d = je.at("video").at("d");
  e.video.depth = je.at("video").at("depth");
  e.video.channels = je.at("video").at("channels");
  e.video.tube = tube_from_json(je.at("video").at("tube"));
  e.pointcloud.d = je.at("pointcloud").at("d");
  e.pointcloud.depth = je.at("pointcloud").at("depth");
  e.pointcloud.groups = je.at("pointcloud").at("groups");
  e.pointcloud.group_size = je.at("pointcloud").at("group_size");
  cfg.bridge.queries = j.at("bridge").at("queries");
  cfg.bridge.dim = j.at("bridge").at("dim");
  cfg.bridge.hidden = j.at("bridge").at("hidden");
  cfg.bridge.layers = j.at("bridge").at("layers");
  cfg.bridge.ffn_expansion = j.at("bridge").at("ffn_expansion");
  cfg.backbone.dim = j.at("backbone").at("dim");
  cfg.backbone.blocks = j.at("backbone").at("blocks");
  cfg.backbone.heads = j.at("backbone").at("heads");
  cfg.backbone.context = j.at("backbone").at("context");
  cfg.backbone.adapter_rank = j.at("backbone").at("adapter_rank");
  cfg.backbone.ffn_expansion = j.at("backbone").at("ffn_expansion");
  cfg.backbone.vocab = j.at("backbone").at("vocab");
  cfg.backbone.modal_prefix_full_attention = j.at("backbone").at("modal_prefix_full_attention");
  cfg.head.kind = static_cast<HeadKind>(j.at("head").at("kind").get<int>());
  cfg.head.pooling = j.at("head").at("pooling") == "last" ? Pooling::LastToken : Pooling::MeanOverModal;
  cfg.head.num_classes = j.at("head").at("num_classes");
  cfg.head.target_mean = j.at("head").at("target_mean");
  cfg.head.target_std = j.at("head").at("target_std");
  cfg.head.out_h = j.at("head").at("out_h");
  cfg.head.out_w = j.at("head").at("out_w");
  return cfg;
}

}  // namespace allspark
