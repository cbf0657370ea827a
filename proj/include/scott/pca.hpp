#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scott/errors.hpp"
#include "scott/image.hpp"

namespace scott {

/// Patch features stacked across images, with (image, patch) provenance per row.
struct FeatureMatrix {
  std::int64_t dim = 0;
  std::vector<double> rows;  // row-major, rows() × dim
  std::vector<std::pair<std::int64_t, std::int64_t>> provenance;

  std::int64_t num_rows() const { return dim == 0 ? 0 : static_cast<std::int64_t>(rows.size()) / dim; }
};

struct PcaResult {
  std::int64_t k = 0;
  std::int64_t dim = 0;
  std::vector<double> mean;                // [d]
  std::vector<double> components;          // [k × d], orthonormal rows
  std::vector<double> projections;         // [M × k]
  std::vector<double> explained_variance;  // [k], descending

  double projection(std::int64_t row, std::int64_t comp) const {
    return projections[static_cast<std::size_t>(row * k + comp)];
  }
  /// Negate component `c` and its projection column.
  void flip(std::int64_t c);
};

/// Principal components of the (internally centred) rows of x[M × d] by power
/// iteration with deflation on the covariance (population normalization).
/// Signs are fixed so each component's largest-magnitude loading is positive.
/// Throws DegeneracyError for zero-variance data or k outside [1, min(M, d)].
PcaResult pca(const std::vector<double>& x, std::int64_t rows, std::int64_t dim, std::int64_t k,
              double tol = 1e-10, std::int64_t max_iter = 10000);

/// Foreground flags from the first projection column: value > threshold.
std::vector<std::uint8_t> foreground_split(const std::vector<double>& projections, std::int64_t k,
                                           double threshold = 0.0);

/// Flip the first component if needed so that the side above `threshold` is
/// the smaller population.
void orient_minority_foreground(PcaResult& r, double threshold = 0.0);

/// Min-max scale each of three projection columns to [0, 255]; a column with
/// zero range becomes 128.
std::vector<std::array<std::uint8_t, 3>> rgb_from_projections(const PcaResult& r);

/// Paint one colour per patch into an image of (grid_h·patch) × (grid_w·patch).
/// `colors` has grid_h·grid_w entries; patches with `paint[i] == 0` stay black.
Image render_patch_grid(std::int64_t grid_h, std::int64_t grid_w, std::int64_t patch,
                        const std::vector<std::array<std::uint8_t, 3>>& colors, const std::vector<std::uint8_t>& paint);

struct FeatureAnalysis {
  PcaResult first;
  std::vector<std::uint8_t> foreground;  // per row of the feature matrix
  bool has_second = false;
  PcaResult second;                      // over foreground rows only
  std::vector<std::int64_t> second_rows; // feature-matrix row of each second-stage row
  std::vector<Image> renders;            // one per image
};

/// First PCA (k = 3) over all rows, minority-side foreground split, optional
/// second PCA over foreground rows; renders per image. Without the second
/// stage the render maps the first three components to RGB over every patch.
FeatureAnalysis analyze_features(const FeatureMatrix& fm, std::int64_t num_images, std::int64_t grid_h,
                                 std::int64_t grid_w, std::int64_t patch, bool second_stage, double threshold = 0.0);

/// CSV: image,patch,row,col,pc1,pc2,pc3,foreground[,fg1,fg2,fg3]
void write_projections_csv(const std::filesystem::path& path, const FeatureMatrix& fm, const FeatureAnalysis& fa,
                           std::int64_t grid_w, const std::vector<std::string>& image_names);

}  // namespace scott
