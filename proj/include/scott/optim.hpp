#pragma once

#include <cstdint>
#include <vector>

#include "scott/params.hpp"

namespace scott {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Apply weight decay to rank-0/1 parameters (biases, norms, mask token) too.
  bool decay_vectors = false;
};

/// AdamW with decoupled weight decay: p ← p·(1 − lr·wd), then the Adam update.
/// Parameters without a gradient buffer are treated as having zero gradient.
template <Real T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(NamedTensors<T> params, AdamWConfig cfg = {});

  void step(double lr, double wd);
  std::int64_t steps() const { return steps_; }

  /// Moments as named tensors ("m.<name>", "v.<name>") for checkpointing.
  NamedTensors<T> state() const;
  /// Restore moments and step counter; names and shapes must match.
  void load_state(const NamedTensors<T>& moments, std::int64_t steps);

  const NamedTensors<T>& params() const { return params_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  NamedTensors<T> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t steps_ = 0;
};

/// Global L2 norm of all gradients (missing gradients count as zero).
template <Real T>
double grad_norm(const NamedTensors<T>& params);

/// Zero every gradient buffer.
template <Real T>
void zero_grads(NamedTensors<T>& params);

}  // namespace scott
