#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scott/checkpoint.hpp"
#include "scott/config.hpp"
#include "scott/dataset.hpp"
#include "scott/transformer.hpp"

namespace scott {

/// Mean over tokens → LayerNorm → linear classifier.
template <Real T>
struct LinearProbe {
  LayerNorm<T> norm;
  Linear<T> head;

  LinearProbe() = default;
  LinearProbe(std::int64_t dim, std::int64_t classes, Rng& rng);
  /// features[B × N × d] → logits[B × classes].
  Tensor<T> operator()(const Tensor<T>& features) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// One learnable query cross-attends to all tokens; the attention output is
/// added back to the query, then SwiGLU → LayerNorm → linear classifier.
template <Real T>
struct AttentiveProbe {
  Tensor<T> query;  // [d]
  Linear<T> q, k, v, proj;
  SwiGLU<T> ffn;
  LayerNorm<T> norm;
  Linear<T> head;
  std::int64_t heads = 1;

  AttentiveProbe() = default;
  AttentiveProbe(std::int64_t dim, std::int64_t classes, std::int64_t heads, Rng& rng);
  /// Multi-head cross-attention of the query over features, before the
  /// output projection: [B × 1 × d].
  Tensor<T> attend(const Tensor<T>& features) const;
  Tensor<T> operator()(const Tensor<T>& features) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// Either probe kind behind one interface.
class Probe {
 public:
  Probe() = default;
  Probe(ProbeKind kind, std::int64_t dim, std::int64_t classes, std::int64_t heads, Rng& rng);

  Tensor<float> operator()(const Tensor<float>& features) const;
  NamedTensors<float> parameters() const;
  ProbeKind kind() const { return kind_; }
  std::int64_t classes() const { return classes_; }

 private:
  ProbeKind kind_ = ProbeKind::kLinear;
  std::int64_t classes_ = 0;
  LinearProbe<float> linear_;
  AttentiveProbe<float> attentive_;
};

/// Fraction of rows whose label is among the k highest logits (ties broken
/// toward the lower class index).
double topk_accuracy(const Tensor<float>& logits, std::span<const std::int64_t> labels, std::int64_t k);

/// Frozen patch features for preprocessed images, batched, without a tape.
Tensor<float> encode_frozen(const VisionEncoder<float>& encoder, std::span<const Image> images, std::int64_t batch);

/// Resize (256:224) + centre crop + normalize.
Image eval_preprocess(const Image& img, std::int64_t size, const AugmentConfig& aug);

struct ProbeEpoch {
  std::int64_t epoch = 0;
  double loss = 0;
  double train_top1 = 0;
};

/// Train a probe on frozen features with AdamW (cosine lr, constant wd) and
/// cross-entropy. The encoder is never modified.
Probe train_probe(const VisionEncoder<float>& encoder, const Dataset& train, const TrainConfig& cfg,
                  std::uint64_t seed, const std::function<void(const ProbeEpoch&)>& on_epoch = {});

struct EvalResult {
  double top1 = 0;
  double top5 = 0;
  std::int64_t count = 0;
};

/// Top-1/Top-5 over a labeled dataset. Empty dataset → ContractError.
EvalResult evaluate(const VisionEncoder<float>& encoder, const Probe& probe, const Dataset& data, const TrainConfig& cfg);

Checkpoint probe_checkpoint(const Probe& probe, const TrainConfig& cfg, const std::string& backbone_digest);
Probe load_probe(const Checkpoint& ckpt, std::int64_t dim);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace scott
