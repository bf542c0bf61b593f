#pragma once

#include "allspark/datagen.hpp"
#include "allspark/optimizer.hpp"
#include "allspark/schedule.hpp"

namespace allspark {

/// Complete experiment description: pipeline dimensions and task wiring are
/// derived from the dataset plus preset; the schedule is either the desk
/// default (lr 1e-3, 30x10 steps) or the per-modality published regime.
struct RunConfig {
  Modality modality = Modality::Rgb;
  TaskKind task = TaskKind::Classify;
  bool task_set = false;  // false: default task for the modality
  std::string preset = "desk";
  std::uint64_t seed = 7;
  std::string data_dir;
  std::string out_dir;
  std::string prompts_path;
  std::string schedule_source = "desk";  // desk | paper | custom
  ScheduleSpec schedule{1e-3, 30, 3, 10};
  std::size_t batch_size = 4;
  double clip_norm = 1.0;  // 0 disables clipping
  AdamW::Config optim;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::vector<std::pair<std::string, bool>> freeze_overrides;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& rc);

struct TrainResult {
  std::vector<std::array<double, 3>> curve;  // step, lr, loss
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string checkpoint_dir;
  std::string curve_path;
};

/// Builds the pipeline around the dataset, runs the optimization loop, and
/// writes the loss curve (`step,lr,loss`) plus a final checkpoint.
TrainResult train_run(const RunConfig& rc);

/// Loads a checkpoint, evaluates the eval-mode pipeline over a dataset, and
/// writes metrics.json plus a flat metrics.csv. Returns the report JSON.
std::string eval_run(const std::string& checkpoint_dir, const std::string& data_dir, const std::string& out_dir,
                     const std::string& prompts_path);

/// Derives the pipeline config for a run from its dataset (head sizing,
/// table bins, regression unscale statistics).
PipelineConfig pipeline_config_for(const RunConfig& rc, const LoadedDataset& data);

}  // namespace allspark
