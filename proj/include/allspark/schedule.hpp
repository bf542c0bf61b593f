#pragma once

#include "allspark/encoders.hpp"

namespace allspark {

/// Cosine annealing with linear warmup. lr(0) = 0 when warmup is enabled,
/// lr(warmup end) = max_lr exactly, then the half-cosine decays towards 0
/// over the remaining steps.
struct ScheduleSpec {
  double max_lr = 1e-3;
  std::size_t max_epochs = 30;
  std::size_t warmup_epochs = 3;
  std::size_t steps_per_epoch = 10;

  std::size_t total_steps() const { return max_epochs * steps_per_epoch; }
  std::size_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
};

void validate_schedule(const ScheduleSpec& spec);
double lr_at(const ScheduleSpec& spec, std::size_t step);

/// The per-modality optimizer regime (max lr, epochs, warmup epochs) as
/// printed in the hyperparameter summary; learning-rate exponents are read
/// as negative powers of ten. steps_per_epoch is supplied by the caller.
ScheduleSpec table2_schedule(Modality m, std::size_t steps_per_epoch);

}  // namespace allspark
