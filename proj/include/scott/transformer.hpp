#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scott/params.hpp"
#include "scott/tokenizer.hpp"

namespace scott {

struct BackboneConfig {
  std::int64_t dim = 384;
  std::int64_t blocks = 12;
  std::int64_t heads = 6;
  std::int64_t ffn_hidden = 0;  // 0 → round(8·dim/3)

  std::int64_t hidden() const;
  void validate() const;

  static BackboneConfig scott7_16() { return {384, 7, 4, 0}; }
  static BackboneConfig scott12_16() { return {384, 12, 6, 0}; }
};

struct PredictorConfig {
  std::int64_t blocks = 3;
  std::int64_t dim = 384;
  std::int64_t heads = 6;
  std::int64_t ffn_hidden = 0;

  void validate() const;
};

/// Fixed 2-D sin/cos table, [N × d] with N = grid_h·grid_w in row-major order.
/// Each row is [sin(col·ω), cos(col·ω), sin(row·ω), cos(row·ω)] with d/4
/// frequencies ω_k = 10000^(−k/(d/4)). Throws ConfigError unless d % 4 == 0.
template <Real T>
Tensor<T> sinusoidal_positions(std::int64_t grid_h, std::int64_t grid_w, std::int64_t dim);

/// Replace every inactive token row by the shared mask embedding.
template <Real T>
Tensor<T> substitute_mask_tokens(const Tensor<T>& tokens, std::span<const std::uint8_t> active,
                                 const Tensor<T>& mask_token);

template <Real T>
struct Linear {
  Tensor<T> weight;  // [in × out]
  Tensor<T> bias;    // [out]

  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, Rng& rng, double stddev = 0.02);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <Real T>
struct LayerNorm {
  Tensor<T> gamma, beta;

  LayerNorm() = default;
  explicit LayerNorm(std::int64_t dim);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// w3( silu(w1 x) ⊙ w2 x ).
template <Real T>
struct SwiGLU {
  Linear<T> w1, w2, w3;

  SwiGLU() = default;
  SwiGLU(std::int64_t dim, std::int64_t hidden, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// Pre-norm encoder block: x += MHSA(LN(x)); x += SwiGLU(LN(x)).
template <Real T>
struct Block {
  LayerNorm<T> norm1, norm2;
  Linear<T> qkv, proj;
  SwiGLU<T> ffn;
  std::int64_t heads = 1;

  Block() = default;
  Block(std::int64_t dim, std::int64_t heads, std::int64_t hidden, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

/// L blocks followed by a final LayerNorm.
template <Real T>
struct TransformerStack {
  std::vector<Block<T>> blocks;
  LayerNorm<T> norm;

  TransformerStack() = default;
  TransformerStack(std::int64_t dim, std::int64_t depth, std::int64_t heads, std::int64_t hidden, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

struct EncoderConfig {
  TokenizerKind tokenizer = TokenizerKind::kScott;
  StemConfig stem;
  BackboneConfig backbone;

  static EncoderConfig scott7_16();
  static EncoderConfig scott12_16();
};

/// SCOTT-enabled ViT: tokenizer, mask-token substitution, fixed positions,
/// encoder blocks. No class token, no head.
template <Real T>
class VisionEncoder {
 public:
  VisionEncoder() = default;
  VisionEncoder(const EncoderConfig& cfg, Rng& rng);

  /// images[B × H × W × 3] → patch features [B × N × d]. Empty `masks` = full image.
  Tensor<T> operator()(const Tensor<T>& images_nhwc, std::span<const MaskSet> masks = {}) const;
  /// Transformer part only, on a token grid (mask tokens substituted, positions added here).
  Tensor<T> encode_tokens(const TokenGrid<T>& grid) const;

  NamedTensors<T> parameters() const;
  const EncoderConfig& config() const { return cfg_; }

  Tokenizer<T> tokenizer;
  Tensor<T> mask_token;  // [d]
  TransformerStack<T> stack;

 private:
  EncoderConfig cfg_;
};

/// Shallow transformer mapping context features to per-position predictions.
/// When the predictor width differs from the encoder width, linear maps in and
/// out of the predictor width are added.
template <Real T>
class Predictor {
 public:
  Predictor() = default;
  Predictor(std::int64_t encoder_dim, const PredictorConfig& cfg, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& context) const;
  NamedTensors<T> parameters() const;
  const PredictorConfig& config() const { return cfg_; }

  Linear<T> embed, unembed;  // only when widths differ
  TransformerStack<T> stack;

 private:
  PredictorConfig cfg_;
  bool project_ = false;
};

/// Exact parameter count of an encoder built from `cfg` (no allocation).
std::int64_t encoder_parameter_count(const EncoderConfig& cfg);

}  // namespace scott
