#include "scott/pca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "scott/errors.hpp"

namespace scott {

void PcaResult::flip(std::int64_t c) {
  for (std::int64_t j = 0; j < dim; ++j) components[static_cast<std::size_t>(c * dim + j)] *= -1.0;
  const auto m = static_cast<std::int64_t>(projections.size()) / k;
  for (std::int64_t i = 0; i < m; ++i) projections[static_cast<std::size_t>(i * k + c)] *= -1.0;
}

PcaResult pca(const std::vector<double>& x, std::int64_t rows, std::int64_t dim, std::int64_t k, double tol,
              std::int64_t max_iter) {
  if (rows < 1 || dim < 1 || static_cast<std::int64_t>(x.size()) != rows * dim)
    throw DimensionError("pca expects a non-empty [M x d] matrix");
  if (k < 1 || k > std::min(rows, dim)) throw DegeneracyError("pca: k must lie in [1, min(M, d)]");
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> X(x.data(), rows, dim);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Mat Xc = X.rowwise() - mu;
  Eigen::MatrixXd C = (Xc.transpose() * Xc) / static_cast<double>(rows);
  const double total = C.trace();
  if (!(total > 1e-300)) throw DegeneracyError("pca: data has zero variance");

  PcaResult r;
  r.k = k;
  r.dim = dim;
  r.mean.assign(mu.data(), mu.data() + dim);
  r.components.assign(static_cast<std::size_t>(k * dim), 0.0);
  r.explained_variance.assign(static_cast<std::size_t>(k), 0.0);
  for (std::int64_t c = 0; c < k; ++c) {
    // start from the column of largest norm: deterministic and never orthogonal
    // to the dominant direction unless the matrix is already deflated to zero
    Eigen::Index best = 0;
    C.colwise().norm().maxCoeff(&best);
    Eigen::VectorXd v = C.col(best);
    double n = v.norm();
    if (n <= 1e-300 * total) {
      v = Eigen::VectorXd::Zero(dim);
      v(c % dim) = 1.0;
    } else {
      v /= n;
    }
    for (std::int64_t it = 0; it < max_iter; ++it) {
      Eigen::VectorXd w = C * v;
      const double wn = w.norm();
      if (wn <= 1e-300) break;
      w /= wn;
      const double diff = std::min((w - v).norm(), (w + v).norm());
      v = w;
      if (diff < tol) break;
    }
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const double lambda = std::max(0.0, v.dot(C * v));
    r.explained_variance[static_cast<std::size_t>(c)] = lambda;
    for (std::int64_t j = 0; j < dim; ++j) r.components[static_cast<std::size_t>(c * dim + j)] = v(j);
    C -= lambda * v * v.transpose();
  }
  Eigen::Map<const Mat> W(r.components.data(), k, dim);
  r.projections.resize(static_cast<std::size_t>(rows * k));
  Eigen::Map<Mat> P(r.projections.data(), rows, k);
  P = Xc * W.transpose();
  return r;
}

std::vector<std::uint8_t> foreground_split(const std::vector<double>& projections, std::int64_t k, double threshold) {
  if (k < 1) throw DimensionError("foreground_split needs at least one component");
  const auto m = static_cast<std::int64_t>(projections.size()) / k;
  std::vector<std::uint8_t> fg(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) fg[static_cast<std::size_t>(i)] = projections[static_cast<std::size_t>(i * k)] > threshold;
  return fg;
}

void orient_minority_foreground(PcaResult& r, double threshold) {
  const auto m = static_cast<std::int64_t>(r.projections.size()) / r.k;
  std::int64_t above = 0, below = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double p = r.projection(i, 0);
    if (p > threshold) ++above;
    if (-p > threshold) ++below;
  }
  if (above > below) r.flip(0);
}

std::vector<std::array<std::uint8_t, 3>> rgb_from_projections(const PcaResult& r) {
  const auto m = static_cast<std::int64_t>(r.projections.size()) / r.k;
  std::vector<std::array<std::uint8_t, 3>> out(static_cast<std::size_t>(m), {128, 128, 128});
  for (std::int64_t c = 0; c < std::min<std::int64_t>(3, r.k); ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::int64_t i = 0; i < m; ++i) {
      lo = std::min(lo, r.projection(i, c));
      hi = std::max(hi, r.projection(i, c));
    }
    const double range = hi - lo;
    for (std::int64_t i = 0; i < m; ++i) {
      std::uint8_t v = 128;
      if (range > 1e-12 * std::max(1.0, std::abs(hi))) {
        v = static_cast<std::uint8_t>(std::lround(255.0 * (r.projection(i, c) - lo) / range));
      }
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = v;
    }
  }
  return out;
}

Image render_patch_grid(std::int64_t grid_h, std::int64_t grid_w, std::int64_t patch,
                        const std::vector<std::array<std::uint8_t, 3>>& colors, const std::vector<std::uint8_t>& paint) {
  Image img(grid_h * patch, grid_w * patch);
  for (std::int64_t gy = 0; gy < grid_h; ++gy)
    for (std::int64_t gx = 0; gx < grid_w; ++gx) {
      const auto idx = static_cast<std::size_t>(gy * grid_w + gx);
      if (!paint[idx]) continue;
      for (std::int64_t y = 0; y < patch; ++y)
        for (std::int64_t x = 0; x < patch; ++x)
          for (int c = 0; c < 3; ++c) img.at(gy * patch + y, gx * patch + x, c) = colors[idx][static_cast<std::size_t>(c)] / 255.f;
    }
  return img;
}

FeatureAnalysis analyze_features(const FeatureMatrix& fm, std::int64_t num_images, std::int64_t grid_h,
                                 std::int64_t grid_w, std::int64_t patch, bool second_stage, double threshold) {
  const auto n = grid_h * grid_w;
  if (fm.num_rows() != num_images * n) throw DimensionError("feature matrix does not match images × patches");
  FeatureAnalysis fa;
  fa.first = pca(fm.rows, fm.num_rows(), fm.dim, std::min<std::int64_t>(3, std::min(fm.num_rows(), fm.dim)));
  orient_minority_foreground(fa.first, threshold);
  fa.foreground = foreground_split(fa.first.projections, fa.first.k, threshold);

  std::vector<std::array<std::uint8_t, 3>> colors;
  std::vector<std::uint8_t> paint;
  if (second_stage) {
    std::vector<double> fg_rows;
    for (std::int64_t i = 0; i < fm.num_rows(); ++i) {
      if (!fa.foreground[static_cast<std::size_t>(i)]) continue;
      fa.second_rows.push_back(i);
      fg_rows.insert(fg_rows.end(), fm.rows.begin() + i * fm.dim, fm.rows.begin() + (i + 1) * fm.dim);
    }
    const auto m = static_cast<std::int64_t>(fa.second_rows.size());
    if (m < 3) throw DegeneracyError("second-stage PCA needs at least 3 foreground patches, got " + std::to_string(m));
    colors.assign(static_cast<std::size_t>(fm.num_rows()), {0, 0, 0});
    paint = fa.foreground;
    try {
      fa.second = pca(fg_rows, m, fm.dim, std::min<std::int64_t>(3, fm.dim));
      fa.has_second = true;
      const auto rgb = rgb_from_projections(fa.second);
      for (std::int64_t j = 0; j < m; ++j) colors[static_cast<std::size_t>(fa.second_rows[static_cast<std::size_t>(j)])] = rgb[static_cast<std::size_t>(j)];
    } catch (const DegeneracyError&) {
      // identical foreground rows: uniform mid-gray
      for (auto i : fa.second_rows) colors[static_cast<std::size_t>(i)] = {128, 128, 128};
    }
  } else {
    colors = rgb_from_projections(fa.first);
    paint.assign(static_cast<std::size_t>(fm.num_rows()), 1);
  }
  for (std::int64_t img = 0; img < num_images; ++img) {
    std::vector<std::array<std::uint8_t, 3>> c(colors.begin() + img * n, colors.begin() + (img + 1) * n);
    std::vector<std::uint8_t> p(paint.begin() + img * n, paint.begin() + (img + 1) * n);
    fa.renders.push_back(render_patch_grid(grid_h, grid_w, patch, c, p));
  }
  return fa;
}

void write_projections_csv(const std::filesystem::path& path, const FeatureMatrix& fm, const FeatureAnalysis& fa,
                           std::int64_t grid_w, const std::vector<std::string>& image_names) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(9);
  out << "image,patch,row,col,pc1,pc2,pc3,foreground";
  if (fa.has_second) out << ",fg1,fg2,fg3";
  out << '\n';
  std::vector<std::int64_t> second_index(static_cast<std::size_t>(fm.num_rows()), -1);
  for (std::size_t j = 0; j < fa.second_rows.size(); ++j) second_index[static_cast<std::size_t>(fa.second_rows[j])] = static_cast<std::int64_t>(j);
  for (std::int64_t i = 0; i < fm.num_rows(); ++i) {
    const auto [img, patch] = fm.provenance[static_cast<std::size_t>(i)];
    out << image_names[static_cast<std::size_t>(img)] << ',' << patch << ',' << patch / grid_w << ',' << patch % grid_w;
    for (std::int64_t c = 0; c < 3; ++c) {
      out << ',';
      if (c < fa.first.k) out << fa.first.projection(i, c);
    }
    out << ',' << static_cast<int>(fa.foreground[static_cast<std::size_t>(i)]);
    if (fa.has_second) {
      const auto j = second_index[static_cast<std::size_t>(i)];
      for (std::int64_t c = 0; c < 3; ++c) {
        out << ',';
        if (j >= 0 && c < fa.second.k) out << fa.second.projection(j, c);
      }
    }
    out << '\n';
  }
}

}  // namespace scott
