#pragma once

#include <functional>
#include <memory>

#include "allspark/common.hpp"

namespace allspark {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major tensor. Values are held as doubles; in F32 mode every
/// stored value is quantized to float representability after each primitive,
/// so 32-bit storage semantics hold while kernels accumulate in double.
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;
  Dtype dtype = Dtype::F32;
  bool requires_grad = false;
  std::vector<double> grad;  // same length as data when requires_grad

  Tensor() = default;
  Tensor(std::vector<std::size_t> d, Dtype dt, bool rg);

  static TensorPtr make(std::vector<std::size_t> dims, Dtype dt = Dtype::F32, bool requires_grad = false);
  static TensorPtr zeros(std::vector<std::size_t> dims, Dtype dt = Dtype::F32, bool requires_grad = false);
  static TensorPtr full(std::vector<std::size_t> dims, double value, Dtype dt = Dtype::F32,
                        bool requires_grad = false);
  static TensorPtr scalar(double value, Dtype dt = Dtype::F32, bool requires_grad = false);
  static TensorPtr from(std::vector<std::size_t> dims, std::vector<double> values, Dtype dt = Dtype::F32,
                        bool requires_grad = false);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return dims.size(); }
  bool is_scalar() const { return numel() == 1; }

  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  /// Round every stored value to float precision when dtype is F32.
  void quantize();
  void ensure_grad();
  void zero_grad();
  bool all_finite() const;
};

std::size_t checked_numel(const std::vector<std::size_t>& dims);

/// Record of the primitive ops executed on this thread, in execution order
/// (which is a topological order of the data flow). backward() replays it
/// once, in reverse, then clears it.
class Tape {
public:
  static Tape& current();

  void record(std::function<void()> backward_fn);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void replay_reverse();

  static bool grad_enabled();
  static void set_grad_enabled(bool on);

private:
  std::vector<std::function<void()>> nodes_;
};

/// Disables tape recording for the enclosing scope (eval / data paths).
struct NoGradGuard {
  NoGradGuard() : prev_(Tape::grad_enabled()) { Tape::set_grad_enabled(false); }
  ~NoGradGuard() { Tape::set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

/// Reverse-mode pass from a scalar loss. Populates grad on every
/// requires_grad tensor reachable from the tape; grads accumulate until
/// explicitly zeroed. The tape is cleared afterwards.
void backward(const TensorPtr& loss);

/// True when an op applied to these inputs should track gradients.
bool track_grad(const TensorPtr& a);
bool track_grad(const TensorPtr& a, const TensorPtr& b);

/// Dtype-converting copy (no gradient tracking); used when moving raw
/// sample data into a 64-bit pipeline.
TensorPtr with_dtype(const Tensor& t, Dtype dt);

}  // namespace allspark
