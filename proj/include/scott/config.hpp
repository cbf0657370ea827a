#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scott/augment.hpp"
#include "scott/masking.hpp"
#include "scott/optim.hpp"
#include "scott/schedule.hpp"
#include "scott/transformer.hpp"

namespace scott {

/// How the two augmented views enter the loss. Independent: each view is its
/// own example (context and target from the same view). Paired: view 1 feeds
/// the context encoder, view 2 the target encoder.
enum class ViewConsumption { kIndependent, kPaired };

ViewConsumption parse_view_consumption(const std::string& name);
std::string to_string(ViewConsumption c);

enum class ProbeKind { kLinear, kAttentive };

ProbeKind parse_probe_kind(const std::string& name);
std::string to_string(ProbeKind k);

struct ProbeConfig {
  ProbeKind kind = ProbeKind::kLinear;
  std::int64_t epochs = 100;
  std::int64_t batch = 64;
  double lr = 1e-3;
  double wd = 0.01;
  std::int64_t heads = 6;
  /// Crop + flip during probe training; off means a fixed resize-centre-crop.
  bool augment = true;
};

/// Every hyperparameter of a run. Text form is flat key=value, one per line,
/// '#' starts a comment; keys not listed by config_keys() are rejected.
struct TrainConfig {
  std::uint64_t seed = 0;
  std::int64_t batch = 128;
  std::int64_t image_size = 224;
  double data_fraction = 1.0;
  std::int64_t checkpoint_every = 1;

  EncoderConfig encoder = EncoderConfig::scott12_16();
  PredictorConfig predictor;
  ScheduleConfig schedule;
  AdamWConfig adamw;
  double loss_beta = 1.0;

  MaskStrategy mask_strategy = MaskStrategy::kBlockwise;
  double mask_ratio = 0.6;
  BlockwiseParams blockwise;

  AugmentConfig augment;
  ViewConsumption consumption = ViewConsumption::kIndependent;
  ProbeConfig probe;

  std::int64_t epochs() const { return static_cast<std::int64_t>(schedule.epochs); }
  std::int64_t steps_per_epoch(std::int64_t dataset_size) const;
  std::int64_t total_steps(std::int64_t dataset_size) const;

  /// Throws ConfigError naming the first offending key.
  void validate() const;
  /// Canonical text: every key, sorted, one `key=value` per line.
  std::string to_text() const;
  /// FNV-1a 64 of to_text(); independent of key order in the source file.
  std::uint64_t digest() const;

  /// Small model for single-core runs: 64×64 images, d = 192, 3 blocks.
  static TrainConfig desk();
};

std::vector<std::string> config_keys();
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

/// Apply key=value lines on top of `base`.
TrainConfig parse_config_text(const std::string& text, const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = {});

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace scott
