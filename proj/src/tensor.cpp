#include "allspark/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace allspark {

std::size_t checked_numel(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + dims_str(dims));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<std::size_t> d, Dtype dt, bool rg)
    : dims(std::move(d)), data(checked_numel(dims), 0.0), dtype(dt), requires_grad(rg) {
  if (requires_grad) grad.assign(data.size(), 0.0);
}

TensorPtr Tensor::make(std::vector<std::size_t> dims, Dtype dt, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(dims), dt, requires_grad);
}

TensorPtr Tensor::zeros(std::vector<std::size_t> dims, Dtype dt, bool requires_grad) {
  return make(std::move(dims), dt, requires_grad);
}

TensorPtr Tensor::full(std::vector<std::size_t> dims, double value, Dtype dt, bool requires_grad) {
  auto t = make(std::move(dims), dt, requires_grad);
  std::fill(t->data.begin(), t->data.end(), value);
  t->quantize();
  return t;
}

TensorPtr Tensor::scalar(double value, Dtype dt, bool requires_grad) {
  return full({1}, value, dt, requires_grad);
}

TensorPtr Tensor::from(std::vector<std::size_t> dims, std::vector<double> values, Dtype dt,
                       bool requires_grad) {
  std::size_t n = checked_numel(dims);
  if (values.size() != n) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match dims " + dims_str(dims));
  }
  auto t = std::make_shared<Tensor>();
  t->dims = std::move(dims);
  t->data = std::move(values);
  t->dtype = dt;
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(t->data.size(), 0.0);
  t->quantize();
  return t;
}

std::size_t Tensor::rows() const {
  if (dims.size() != 2) throw ShapeError("rows() needs a 2-d tensor, got " + dims_str(dims));
  return dims[0];
}

std::size_t Tensor::cols() const {
  if (dims.size() != 2) throw ShapeError("cols() needs a 2-d tensor, got " + dims_str(dims));
  return dims[1];
}

void Tensor::quantize() {
  if (dtype != Dtype::F32) return;
  for (double& v : data) v = static_cast<double>(static_cast<float>(v));
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {
thread_local Tape t_tape;
thread_local bool t_grad_enabled = true;
}  // namespace

Tape& Tape::current() { return t_tape; }

bool Tape::grad_enabled() { return t_grad_enabled; }

void Tape::set_grad_enabled(bool on) { t_grad_enabled = on; }

void Tape::record(std::function<void()> backward_fn) {
  nodes_.push_back(std::move(backward_fn));
}

void Tape::replay_reverse() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void backward(const TensorPtr& loss) {
  if (!loss || !loss->is_scalar()) {
    throw ContractError("backward expects a scalar loss, got " + (loss ? dims_str(loss->dims) : std::string("null")));
  }
  if (!loss->requires_grad) {
    // Loss disconnected from any tracked parameter: nothing to do.
    Tape::current().clear();
    return;
  }
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  Tape::current().replay_reverse();
  Tape::current().clear();
}

bool track_grad(const TensorPtr& a) { return Tape::grad_enabled() && a->requires_grad; }

TensorPtr with_dtype(const Tensor& t, Dtype dt) {
  auto out = Tensor::make(t.dims, dt, false);
  out->data = t.data;
  out->quantize();
  return out;
}

bool track_grad(const TensorPtr& a, const TensorPtr& b) {
  return Tape::grad_enabled() && (a->requires_grad || b->requires_grad);
}

}  // namespace allspark
