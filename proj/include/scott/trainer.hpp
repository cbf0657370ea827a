#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scott/checkpoint.hpp"
#include "scott/config.hpp"
#include "scott/dataset.hpp"
#include "scott/optim.hpp"
#include "scott/transformer.hpp"

namespace scott {

/// θ̄ ← m·θ̄ + (1 − m)·θ per parameter. Names and shapes must match.
template <Real T>
void ema_update(NamedTensors<T>& target, const NamedTensors<T>& online, double m);

/// Per-token affine-free layer normalization of target features.
template <Real T>
Tensor<T> normalize_targets(const Tensor<T>& features);

/// Flat row indices (b·N + i) of every masked position, batch-major.
std::vector<std::int64_t> masked_rows(std::span<const MaskSet> masks);

/// Mean Smooth-L1 between predictions and targets ([B×N×d] each) over the
/// masked positions only. Rows outside M never enter the computation.
template <Real T>
Tensor<T> masked_loss(const Tensor<T>& pred, const Tensor<T>& target, std::span<const MaskSet> masks, T beta);

/// Context encoder f_θ, EMA target encoder f_θ̄, predictor f_φ.
template <Real T>
struct JepaModel {
  VisionEncoder<T> context;
  VisionEncoder<T> target;
  Predictor<T> predictor;

  JepaModel() = default;
  /// Target starts as an exact copy of the context encoder and never
  /// requires gradients.
  JepaModel(const TrainConfig& cfg, Rng& rng);

  /// context.* and predictor.* parameters, in a fixed order.
  NamedTensors<T> trainable() const;
  NamedTensors<T> target_parameters() const { return target.parameters(); }
};

/// One training batch: context inputs, target inputs and a mask per row.
template <Real T>
struct JepaBatch {
  Tensor<T> context_images;  // [B × H × W × 3], normalized
  Tensor<T> target_images;   // [B × H × W × 3], normalized
  std::vector<MaskSet> masks;
};

struct StepMetrics {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double lr = 0, wd = 0, ema_m = 0;
  double loss = 0;
  double target_std = 0;      // mean over dimensions of the per-dimension std
  double target_std_min = 0;  // smallest per-dimension std
  double grad_norm = 0;

  std::string to_json() const;
};

/// Model + optimizer + schedule position: everything that changes during training.
struct TrainState {
  JepaModel<float> model;
  AdamW<float> optim;
  std::int64_t step = 0;
  double best_loss = 0;
  bool has_best = false;
  double epoch_loss_sum = 0;  // running sums for the current epoch's mean loss
  std::int64_t epoch_loss_count = 0;
  Rng mask_rng;
};

TrainState make_train_state(const TrainConfig& cfg);

/// Forward both paths, masked loss, backward, AdamW on θ and φ, EMA on θ̄.
/// Throws NumericError (state untouched) when the loss is not finite.
StepMetrics train_step(TrainState& state, const JepaBatch<float>& batch, const TrainConfig& cfg,
                       std::int64_t total_steps);

/// Views and masks for `step`: per-epoch seeded shuffle, per-sample augmentation
/// streams derived from (seed, epoch, sample index), masks drawn from `mask_rng`.
JepaBatch<float> make_batch(const Dataset& data, const TrainConfig& cfg, std::int64_t step, Rng& mask_rng);

/// Augmented view pairs for a step (masks not drawn).
std::vector<ViewPair> make_step_views(const Dataset& data, const TrainConfig& cfg, std::int64_t step);

Checkpoint to_checkpoint(const TrainState& state, const TrainConfig& cfg);
/// Restore state from a checkpoint written by to_checkpoint for the same config.
TrainState from_checkpoint(const Checkpoint& ckpt, TrainConfig& cfg_out);

/// Encoder weights from a checkpoint: `which` is "target" (EMA encoder, the
/// default for evaluation) or "context".
VisionEncoder<float> load_encoder(const Checkpoint& ckpt, TrainConfig& cfg_out, const std::string& which = "target");

struct PretrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  /// Stop after this global step (exclusive upper bound); -1 = run to the end.
  std::int64_t stop_at = -1;
  std::size_t prefetch = 2;
  std::function<void(const StepMetrics&)> on_step;
};

struct PretrainResult {
  std::vector<StepMetrics> metrics;  // steps run in this invocation
  std::filesystem::path last_checkpoint;
  std::int64_t total_steps = 0;
};

/// Runs epochs·⌈n/batch⌉ steps from step 0 (or the resumed step). Writes
/// out/metrics.jsonl, out/checkpoints/epoch_NNNN.ckpt (every
/// checkpoint.every epochs), best.ckpt (lowest epoch-mean loss), last.ckpt and
/// out/manifest.json.
PretrainResult pretrain(const Dataset& data, const TrainConfig& cfg, const PretrainOptions& opts);

}  // namespace scott
