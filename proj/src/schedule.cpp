#include "scott/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scott/errors.hpp"

namespace scott {

void ScheduleConfig::validate() const {
  if (!(epochs > 0)) throw ConfigError("epochs must be positive", "epochs");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw ConfigError("warmup must lie within the run", "optim.warmup_epochs");
  if (flat_fraction < 0 || flat_fraction > 1) throw ConfigError("flat fraction must be in [0,1]", "optim.flat_fraction");
  if (lr_start > lr_peak) throw ConfigError("lr_start must not exceed lr_peak", "optim.lr_start");
  if (ema_start < 0 || ema_start > 1) throw ConfigError("EMA momentum must be in [0,1]", "ema.start");
  if (ema_end < 0 || ema_end > 1) throw ConfigError("EMA momentum must be in [0,1]", "ema.end");
}

double ScheduleConfig::flat_end() const {
  const double w = warmup_end();
  return w + flat_fraction * (1.0 - w);
}

double lr_at(double t, const ScheduleConfig& cfg) {
  t = std::clamp(t, 0.0, 1.0);
  const double w = cfg.warmup_end();
  if (t < w) return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * (t / w);
  const double f = cfg.flat_end();
  if (t <= f || f >= 1.0) return cfg.lr_peak;
  const double u = (t - f) / (1.0 - f);
  return cfg.lr_final + (cfg.lr_peak - cfg.lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

double wd_at(double t, const ScheduleConfig& cfg) {
  t = std::clamp(t, 0.0, 1.0);
  return (1.0 - t) * cfg.wd_start + t * cfg.wd_end;
}

double ema_at(double t, const ScheduleConfig& cfg) {
  t = std::clamp(t, 0.0, 1.0);
  return (1.0 - t) * cfg.ema_start + t * cfg.ema_end;
}

double train_fraction(std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return 1.0;
  return std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
}

}  // namespace scott
