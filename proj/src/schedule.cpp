#include "allspark/schedule.hpp"

#include <cmath>

namespace allspark {

void validate_schedule(const ScheduleSpec& spec) {
  if (!(spec.max_lr > 0.0)) throw ContractError("schedule: max_lr must be positive");
  if (spec.warmup_epochs >= spec.max_epochs) {
    throw ContractError("schedule: warmup_epochs must be smaller than max_epochs");
  }
  if (spec.steps_per_epoch == 0) throw ContractError("schedule: steps_per_epoch must be positive");
}

double lr_at(const ScheduleSpec& spec, std::size_t step) {
  validate_schedule(spec);
  const std::size_t total = spec.total_steps();
  const std::size_t warmup = spec.warmup_steps();
  if (step >= total) {
    throw ContractError("schedule: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + ")");
  }
  if (step < warmup) {
    return spec.max_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return spec.max_lr * (1.0 + std::cos(3.141592653589793 * progress)) / 2.0;
}

ScheduleSpec table2_schedule(Modality m, std::size_t steps_per_epoch) {
  ScheduleSpec s;
  s.steps_per_epoch = steps_per_epoch;
  switch (m) {
    case Modality::Text: s.max_lr = 9.0e-6; s.max_epochs = 5; s.warmup_epochs = 1; break;
    case Modality::Code: s.max_lr = 1.0e-5; s.max_epochs = 4; s.warmup_epochs = 1; break;
    case Modality::Rgb: s.max_lr = 5.0e-5; s.max_epochs = 50; s.warmup_epochs = 5; break;
    case Modality::Msi: s.max_lr = 2.0e-5; s.max_epochs = 50; s.warmup_epochs = 5; break;
    case Modality::Hsi: s.max_lr = 1.0e-4; s.max_epochs = 30; s.warmup_epochs = 3; break;
    case Modality::Infrared: s.max_lr = 5.0e-5; s.max_epochs = 50; s.warmup_epochs = 5; break;
    case Modality::Sar: s.max_lr = 9.0e-6; s.max_epochs = 30; s.warmup_epochs = 3; break;
    case Modality::Oblique: s.max_lr = 5.0e-5; s.max_epochs = 30; s.warmup_epochs = 3; break;
    case Modality::Table: s.max_lr = 2.0e-5; s.max_epochs = 30; s.warmup_epochs = 3; break;
    case Modality::Trajectory: s.max_lr = 1.0e-5; s.max_epochs = 30; s.warmup_epochs = 5; break;
    case Modality::Graph: s.max_lr = 8.0e-5; s.max_epochs = 10; s.warmup_epochs = 2; break;
    case Modality::PointCloud: s.max_lr = 3.0e-5; s.max_epochs = 100; s.warmup_epochs = 10; break;
    case Modality::Video: s.max_lr = 1.0e-5; s.max_epochs = 3; s.warmup_epochs = 1; break;
  }
  return s;
}

}  // namespace allspark
