#pragma once

#include <cstdint>

namespace scott {

/// Learning-rate, weight-decay and EMA-momentum schedules, all functions of
/// the training fraction t = step / total_steps in [0, 1].
struct ScheduleConfig {
  double epochs = 300;
  double warmup_epochs = 40;
  double flat_fraction = 0.72;
  double lr_start = 1e-6;
  double lr_peak = 5e-4;
  double lr_final = 1e-5;
  double wd_start = 0.04;
  double wd_end = 0.4;
  double ema_start = 0.996;
  double ema_end = 1.0;

  void validate() const;
  /// Fraction at which warmup ends.
  double warmup_end() const { return warmup_epochs / epochs; }
  /// Fraction at which the flat phase ends and cosine decay begins.
  double flat_end() const;
};

/// Linear warmup lr_start→lr_peak, flat lr_peak for flat_fraction of the
/// remaining run, then cosine lr_peak→lr_final.
double lr_at(double t, const ScheduleConfig& cfg);
/// Linear wd_start→wd_end.
double wd_at(double t, const ScheduleConfig& cfg);
/// Linear ema_start→ema_end.
double ema_at(double t, const ScheduleConfig& cfg);

/// t for `step` of `total_steps` (clamped to [0, 1]).
double train_fraction(std::int64_t step, std::int64_t total_steps);

}  // namespace scott
