#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scott/params.hpp"
#include "scott/sparse.hpp"

namespace scott {

/// Layer layout of the sparse convolutional stem:
///   conv(in→hidden, K, S, P) · relu · max-blur-pool(3, 2) ·
///   conv(hidden→dim, K, S, P) · relu · max-blur-pool(3, 2)
/// giving a total spatial stride of 16.
struct StemConfig {
  std::int64_t in_channels = 3;
  std::int64_t hidden = 64;
  std::int64_t dim = 384;
  std::int64_t kernel = 7;
  std::int64_t stride = 2;
  std::int64_t padding = 3;

  static constexpr std::int64_t kPatch = 16;
  void validate() const;
};

/// Exact parameter count of a stem (weights + biases of both convolutions).
std::int64_t stem_parameter_count(const StemConfig& cfg);

/// Token sequence from a tokenizer: tokens[B × N × d] in row-major grid order
/// and one activity flag per token (1 = produced from visible content).
template <Real T>
struct TokenGrid {
  Tensor<T> tokens;
  std::vector<std::uint8_t> active;
  std::int64_t grid_h = 0;
  std::int64_t grid_w = 0;
};

/// Sparse convolutional tokenizer.
template <Real T>
class ScottStem {
 public:
  ScottStem() = default;
  ScottStem(const StemConfig& cfg, Rng& rng);

  /// Run the six stem layers on a channels-last masked map.
  MaskedFeatureMap<T> forward(const MaskedFeatureMap<T>& x) const;
  /// forward() plus flattening to a [B × N × d] token grid.
  TokenGrid<T> tokenize(const MaskedFeatureMap<T>& image) const;

  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  const StemConfig& config() const { return cfg_; }

  Tensor<T> conv1_weight, conv1_bias, conv2_weight, conv2_bias;

 private:
  StemConfig cfg_;
};

/// Patchify [B × H × W × C] into [B × N × P·P·C], rows ordered (py, px, c).
template <Real T>
Tensor<T> patchify(const Tensor<T>& images_nhwc, std::int64_t patch);

/// Standard ViT patch-and-embed: a linear map of each P×P patch.
template <Real T>
class PatchEmbed {
 public:
  PatchEmbed() = default;
  PatchEmbed(std::int64_t in_channels, std::int64_t patch, std::int64_t dim, Rng& rng);

  /// images[B × H × W × C] → [B × N × d].
  Tensor<T> forward(const Tensor<T>& images_nhwc) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  std::int64_t patch() const { return patch_; }

  Tensor<T> weight;  // [P·P·C × d]
  Tensor<T> bias;    // [d]

 private:
  std::int64_t patch_ = 16;
};

enum class TokenizerKind { kScott, kPatchEmbed };

TokenizerKind parse_tokenizer_kind(const std::string& name);
std::string to_string(TokenizerKind kind);

/// Either tokenizer behind one interface. Masking enters the SCOTT path as
/// pixel holes and the patch-embed path as token activity.
template <Real T>
class Tokenizer {
 public:
  Tokenizer() = default;
  Tokenizer(TokenizerKind kind, const StemConfig& cfg, Rng& rng);

  /// images[B × H × W × 3]; `masks` empty means fully visible.
  TokenGrid<T> operator()(const Tensor<T>& images_nhwc, std::span<const MaskSet> masks) const;

  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  TokenizerKind kind() const { return kind_; }
  const ScottStem<T>& stem() const { return stem_; }
  ScottStem<T>& stem() { return stem_; }

 private:
  TokenizerKind kind_ = TokenizerKind::kScott;
  ScottStem<T> stem_;
  PatchEmbed<T> embed_;
};

}  // namespace scott
