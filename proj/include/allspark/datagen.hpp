#pragma once

#include "allspark/pipeline.hpp"

namespace allspark {

/// Synthetic task description. Shapes default to desk sizes that satisfy
/// the modality payload contracts; labels follow a planted rule that an
/// independent evaluator can recompute from the payload alone.
struct DatasetSpec {
  Modality modality = Modality::Rgb;
  TaskKind task = TaskKind::Classify;
  std::size_t classes = 4;
  std::size_t count = 8;
  std::uint64_t seed = 7;
  double noise = 0.02;  // pointcloud / trajectory payload noise

  std::size_t h = 32, w = 32;          // images
  std::size_t channels = 8;            // msi bands
  std::size_t hsi_bands = 103;
  std::size_t k_points = 128;          // pointcloud
  std::size_t l_obs = 8, t_pred = 4;   // trajectory
  std::size_t t_frames = 4;            // video
  std::size_t views = 2;               // oblique
  std::size_t nodes = 12;              // graph
  std::size_t node_dim = 8;
  std::size_t columns = 8;             // table
  std::size_t out_h = 4, out_w = 4;    // depth grid
};

DatasetSpec default_dataset_spec(Modality m, TaskKind task);

std::string dataset_spec_to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const std::string& text);

/// Writes samples, labels.csv and manifest.json (spec echo plus content
/// hashes) under dir. Deterministic: the same spec produces byte-identical
/// directories.
void generate_dataset(const DatasetSpec& spec, const std::string& dir);

struct LoadedDataset {
  DatasetSpec spec;
  std::vector<ModalitySample> samples;
  std::vector<Label> labels;
  std::vector<ColumnSpec> table_columns;  // quantile bins fitted at generation
};

/// Reads a dataset back, verifying manifest hashes.
LoadedDataset load_dataset(const std::string& dir);

/// In-memory synthesis (what generate_dataset writes to disk).
LoadedDataset synthesize_dataset(const DatasetSpec& spec);

/// The planted rule: recomputes the label from the payload alone.
Label planted_label(const DatasetSpec& spec, const ModalitySample& sample);

/// FNV-1a 64-bit content hash, hex-encoded.
std::string fnv1a64_hex(const std::string& bytes);

}  // namespace allspark
