#pragma once

// Row-major Eigen views over raw tensor buffers.

#include <Eigen/Dense>
#include <cstdint>

namespace scott {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
inline Eigen::Map<RowMat<T>> cmap(T* p, std::int64_t rows, std::int64_t cols) {
  return Eigen::Map<RowMat<T>>(p, rows, cols);
}

template <typename T>
inline Eigen::Map<const RowMat<T>> ccmap(const T* p, std::int64_t rows, std::int64_t cols) {
  return Eigen::Map<const RowMat<T>>(p, rows, cols);
}

template <typename T>
inline Eigen::Map<RowVec<T>> rowvec(T* p, std::int64_t n) {
  return Eigen::Map<RowVec<T>>(p, n);
}

template <typename T>
inline Eigen::Map<const RowVec<T>> crowvec(const T* p, std::int64_t n) {
  return Eigen::Map<const RowVec<T>>(p, n);
}

// Column block of a wider row-major matrix: `cols` columns starting at p, row pitch `stride`.
template <typename T>
inline Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>> strided(T* p, std::int64_t rows, std::int64_t cols,
                                                               std::int64_t stride) {
  return Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>(p, rows, cols, Eigen::OuterStride<>(stride));
}

template <typename T>
inline Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> cstrided(const T* p, std::int64_t rows,
                                                                     std::int64_t cols, std::int64_t stride) {
  return Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>(p, rows, cols, Eigen::OuterStride<>(stride));
}

/// out[j] += sum_i m[i, j], accumulated in row order so the result does not
/// depend on buffer alignment.
template <typename T>
inline void add_column_sums(T* out, const T* m, std::int64_t rows, std::int64_t cols) {
  for (std::int64_t i = 0; i < rows; ++i) {
    const T* r = m + i * cols;
    for (std::int64_t j = 0; j < cols; ++j) out[j] += r[j];
  }
}

}  // namespace scott
