#pragma once

#include <map>
#include <string>

#include "allspark/tensor.hpp"

namespace allspark {

/// Named parameter tensors with freeze flags. Frozen parameters never
/// require grad, never enter optimizer state, and must stay bit-identical
/// through training. Iteration order is name order, which keeps every
/// downstream loop deterministic.
class ParamStore {
public:
  struct Entry {
    TensorPtr tensor;
    bool frozen = false;
  };

  TensorPtr create(const std::string& name, std::vector<std::size_t> dims, Dtype dt, bool frozen);
  TensorPtr get(const std::string& name) const;
  bool contains(const std::string& name) const;
  bool frozen(const std::string& name) const;
  bool has_prefix(const std::string& prefix) const;

  /// Flip the freeze flag on every parameter whose name starts with prefix.
  void set_frozen_prefix(const std::string& prefix, bool frozen);

  std::vector<std::pair<std::string, TensorPtr>> trainable() const;
  std::vector<std::pair<std::string, TensorPtr>> with_prefix(const std::string& prefix) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  void zero_grads();
  std::size_t scalar_count(bool trainable_only) const;

  /// Checkpoint: one STT1 file per tensor plus manifest.json mapping
  /// name -> {file, dims, frozen}. `extra` is echoed into the manifest.
  void save(const std::string& dir, const std::string& extra_json = "{}") const;
  static ParamStore load(const std::string& dir);
  static std::string load_manifest_extra(const std::string& dir);

private:
  std::map<std::string, Entry> entries_;
};

/// Common initializers.
void init_normal(Tensor& t, Rng& rng, double stddev);
void init_xavier(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out);
void init_zeros(Tensor& t);
void init_ones(Tensor& t);

}  // namespace allspark
