#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scott/errors.hpp"
#include "scott/rng.hpp"

namespace scott {

/// A set M of masked patch indices over a grid_h × grid_w patch grid.
/// Indices are row-major and kept sorted; the context is the complement.
struct MaskSet {
  std::int64_t grid_h = 0;
  std::int64_t grid_w = 0;
  double ratio = 0.0;
  std::vector<std::int64_t> masked;

  std::int64_t num_patches() const { return grid_h * grid_w; }
  bool is_masked(std::int64_t index) const;
  /// Complement of `masked`, sorted.
  std::vector<std::int64_t> context() const;
  /// Per-patch flag, 1 = visible.
  std::vector<std::uint8_t> visibility() const;

  /// Empty mask (everything visible).
  static MaskSet none(std::int64_t grid_h, std::int64_t grid_w);
  /// Build from explicit indices (validated, sorted, deduplicated).
  static MaskSet from_indices(std::int64_t grid_h, std::int64_t grid_w, std::vector<std::int64_t> indices);
};

enum class MaskStrategy { kBlockwise, kRandom };

MaskStrategy parse_mask_strategy(const std::string& name);
std::string to_string(MaskStrategy s);

/// floor(ratio · N); a 1e-9 slack absorbs products like 0.29·100 = 28.999…
std::int64_t masked_count(std::int64_t num_patches, double ratio);

struct BlockwiseParams {
  std::int64_t min_block = 16;
  double min_aspect = 0.3;  // max aspect is 1 / min_aspect
};

struct BlockRect {
  std::int64_t top = 0, left = 0, height = 0, width = 0;
  bool contains(std::int64_t row, std::int64_t col) const {
    return row >= top && row < top + height && col >= left && col < left + width;
  }
};

/// Sampling record of a blockwise draw.
struct BlockwiseTrace {
  std::vector<BlockRect> blocks;
  bool fell_back_to_random = false;
};

/// Union of randomly placed, possibly overlapping rectangles (area ≥ min_block,
/// log-uniform aspect ratio) accumulated until the target count is reached; the
/// last rectangle is trimmed, farthest-from-its-centre cells first, so that
/// |M| = floor(ratio · N) exactly. If no admissible rectangle fits the grid the
/// draw falls back to random masking and a warning is printed.
MaskSet blockwise_mask(std::int64_t grid_h, std::int64_t grid_w, double ratio, Rng& rng,
                       const BlockwiseParams& params = {}, BlockwiseTrace* trace = nullptr);

/// Uniform sample without replacement of floor(ratio · N) patches.
MaskSet random_mask(std::int64_t grid_h, std::int64_t grid_w, double ratio, Rng& rng);

MaskSet draw_mask(MaskStrategy strategy, std::int64_t grid_h, std::int64_t grid_w, double ratio, Rng& rng,
                  const BlockwiseParams& params = {});

/// Mean number of masked 4-neighbours per masked cell (0 for an empty mask).
double mask_contiguity(const MaskSet& mask);

}  // namespace scott
