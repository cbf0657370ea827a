#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

// Straightforward dense references, written independently of the library's
// sparse kernels. All layouts are channels-last [B × H × W × C].

namespace scott::test {

struct Dense {
  std::int64_t b = 0, h = 0, w = 0, c = 0;
  std::vector<double> v;
  double& at(std::int64_t n, std::int64_t y, std::int64_t x, std::int64_t ch) {
    return v[static_cast<std::size_t>(((n * h + y) * w + x) * c + ch)];
  }
  double at(std::int64_t n, std::int64_t y, std::int64_t x, std::int64_t ch) const {
    return v[static_cast<std::size_t>(((n * h + y) * w + x) * c + ch)];
  }
};

/// Zero-padded cross-correlation; weight is [Cout × Cin × K × K].
inline Dense dense_conv(const Dense& x, const std::vector<double>& weight, const std::vector<double>& bias,
                        std::int64_t cout, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  Dense y{x.b, (x.h + 2 * pad - k) / stride + 1, (x.w + 2 * pad - k) / stride + 1, cout, {}};
  y.v.assign(static_cast<std::size_t>(y.b * y.h * y.w * y.c), 0.0);
  for (std::int64_t n = 0; n < y.b; ++n)
    for (std::int64_t i = 0; i < y.h; ++i)
      for (std::int64_t j = 0; j < y.w; ++j)
        for (std::int64_t o = 0; o < cout; ++o) {
          double s = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
          for (std::int64_t ci = 0; ci < x.c; ++ci)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const auto yy = i * stride - pad + ky, xx = j * stride - pad + kx;
                if (yy < 0 || yy >= x.h || xx < 0 || xx >= x.w) continue;
                s += weight[static_cast<std::size_t>(((o * x.c + ci) * k + ky) * k + kx)] * x.at(n, yy, xx, ci);
              }
          y.at(n, i, j, o) = s;
        }
  return y;
}

inline Dense dense_relu(Dense x) {
  for (auto& e : x.v) e = std::max(e, 0.0);
  return x;
}

/// 3×3 stride-1 max pool (out-of-image taps ignored), then a [1,2,1]⊗[1,2,1]
/// blur at stride 2 with padding 1 whose weights are renormalised over the
/// in-image taps.
inline Dense dense_max_blur_pool(const Dense& x) {
  Dense m = x;
  for (std::int64_t n = 0; n < x.b; ++n)
    for (std::int64_t y = 0; y < x.h; ++y)
      for (std::int64_t xx = 0; xx < x.w; ++xx)
        for (std::int64_t ch = 0; ch < x.c; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
              const auto yy = y + dy, xq = xx + dx;
              if (yy >= 0 && yy < x.h && xq >= 0 && xq < x.w) best = std::max(best, x.at(n, yy, xq, ch));
            }
          m.at(n, y, xx, ch) = best;
        }
  const double tap[3] = {1, 2, 1};
  Dense out{x.b, (x.h - 1) / 2 + 1, (x.w - 1) / 2 + 1, x.c, {}};
  out.v.assign(static_cast<std::size_t>(out.b * out.h * out.w * out.c), 0.0);
  for (std::int64_t n = 0; n < x.b; ++n)
    for (std::int64_t i = 0; i < out.h; ++i)
      for (std::int64_t j = 0; j < out.w; ++j)
        for (std::int64_t ch = 0; ch < x.c; ++ch) {
          double s = 0, ws = 0;
          for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
              const auto yy = 2 * i + dy, xq = 2 * j + dx;
              if (yy < 0 || yy >= x.h || xq < 0 || xq >= x.w) continue;
              s += tap[dy + 1] * tap[dx + 1] * m.at(n, yy, xq, ch);
              ws += tap[dy + 1] * tap[dx + 1];
            }
          out.at(n, i, j, ch) = s / ws;
        }
  return out;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n × n).
/// Returns eigenvalues descending with matching unit eigenvectors as rows.
inline void jacobi_eigen(std::vector<double> a, std::int64_t n, std::vector<double>& values,
                         std::vector<double>& vectors) {
  std::vector<double> v(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i * n + i)] = 1.0;
  auto A = [&](std::int64_t i, std::int64_t j) -> double& { return a[static_cast<std::size_t>(i * n + j)]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-30) break;
    for (std::int64_t p = 0; p < n; ++p)
      for (std::int64_t q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::int64_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          const double vkp = v[static_cast<std::size_t>(k * n + p)], vkq = v[static_cast<std::size_t>(k * n + q)];
          v[static_cast<std::size_t>(k * n + p)] = c * vkp - s * vkq;
          v[static_cast<std::size_t>(k * n + q)] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return A(x, x) > A(y, y); });
  values.clear();
  vectors.clear();
  for (auto i : order) {
    values.push_back(A(i, i));
    for (std::int64_t k = 0; k < n; ++k) vectors.push_back(v[static_cast<std::size_t>(k * n + i)]);
  }
}

/// Brute-force population covariance of row-major x[m × d].
inline std::vector<double> covariance(const std::vector<double>& x, std::int64_t m, std::int64_t d) {
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0), c(static_cast<std::size_t>(d * d), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i * d + j)] / m;
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t a = 0; a < d; ++a)
      for (std::int64_t b = 0; b < d; ++b)
        c[static_cast<std::size_t>(a * d + b)] += (x[static_cast<std::size_t>(i * d + a)] - mean[static_cast<std::size_t>(a)]) *
                                                  (x[static_cast<std::size_t>(i * d + b)] - mean[static_cast<std::size_t>(b)]) / m;
  return c;
}

}  // namespace scott::test
