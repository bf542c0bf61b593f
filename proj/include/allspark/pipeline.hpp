#pragma once

#include "allspark/backbone.hpp"
#include "allspark/bridge.hpp"
#include "allspark/heads.hpp"
#include "allspark/prompts.hpp"

namespace allspark {

enum class TaskKind { Classify, Regress, TrajectoryPredict, TextGenerate, Depth };

const char* task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);
TaskKind default_task(Modality m);

/// Supervision for one sample; the active field follows the task kind.
struct Label {
  std::size_t class_id = 0;  // Classify
  double value = 0.0;        // Regress
  TensorPtr grid;            // TrajectoryPredict [T x 2] / Depth [H x W]
  std::string text;          // TextGenerate target
};

struct PipelineConfig {
  Modality modality = Modality::Rgb;
  TaskKind task = TaskKind::Classify;
  std::string preset = "desk";  // desk | paper (paper: printed stack depths)
  EncoderConfig enc;
  BridgeConfig bridge;
  BackboneConfig backbone;
  HeadSpec head;
  Dtype dtype = Dtype::F32;
  std::uint64_t seed = 7;
};

/// Desk-preset pipeline description for one modality/task pair.
PipelineConfig make_pipeline_config(Modality m, TaskKind task, const std::string& preset, std::uint64_t seed);

/// One modality's full model: encoder, bridge, backbone, head, all owned by
/// a single parameter store with the freeze policy applied.
class Pipeline {
public:
  static Pipeline build(const PipelineConfig& cfg, PromptRegistry registry);
  /// Rebuild around parameters restored from a checkpoint.
  static Pipeline restore(const PipelineConfig& cfg, PromptRegistry registry, ParamStore store);

  const PipelineConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const PromptRegistry& registry() const { return registry_; }

  /// encode -> bridge -> assemble(prompt) -> backbone. The prompt is drawn
  /// with `rng` in Train mode and fixed to the first prompt in Eval mode.
  struct ForwardTrace {
    TokenSequence tokens;
    TensorPtr bridged;
    AssembledSequence assembled;
    TensorPtr hidden;
  };
  ForwardTrace forward(const ModalitySample& sample, PromptMode mode, Rng& rng) const;

  /// Task loss for one sample (scalar tensor on the tape).
  TensorPtr loss(const ModalitySample& sample, const Label& label, PromptMode mode, Rng& rng) const;

  /// Eval-mode prediction: logits / value / grid; TextGenerate decodes text.
  TensorPtr predict(const ModalitySample& sample) const;
  std::string generate(const ModalitySample& sample, std::size_t max_len) const;

private:
  PipelineConfig cfg_;
  ParamStore store_;
  PromptRegistry registry_;
};

/// JSON round-trip for PipelineConfig (checkpoint manifests, run configs).
std::string pipeline_config_to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const std::string& json_text);

}  // namespace allspark
