#include "scott/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "eigen_maps.hpp"

namespace scott::ops {

using detail::grad_target;
using detail::make_result;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

std::int64_t norm_axis(std::int64_t axis, std::int64_t rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("axis out of range");
  return axis;
}

// outer × extent × inner decomposition around `axis`.
struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::int64_t axis) {
  AxisSplit r;
  for (std::int64_t i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
  r.extent = s[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <Real T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D df) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = f(v);
  return make_result<T>(x.shape(), std::move(out), {x}, [x, df](const detail::Node<T>& o) {
    T* gx = grad_target(x);
    if (!gx) return;
    const auto xs = x.data();
    for (std::size_t i = 0; i < xs.size(); ++i) gx[i] += o.grad[i] * df(xs[i]);
  });
}

}  // namespace

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 operands, got " +
                                              shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul inner extents differ: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  std::vector<T> out(static_cast<std::size_t>(m * n));
  cmap(out.data(), m, n).noalias() = ccmap(a.data().data(), m, k) * ccmap(b.data().data(), k, n);
  return make_result<T>({m, n}, std::move(out), {a, b}, [a, b, m, k, n](const detail::Node<T>& o) {
    auto g = ccmap(o.grad.data(), m, n);
    if (T* ga = grad_target(a)) {
      cmap(ga, m, k).noalias() += g * ccmap(b.data().data(), k, n).transpose();
    }
    if (T* gb = grad_target(b)) {
      cmap(gb, k, n).noalias() += ccmap(a.data().data(), m, k).transpose() * g;
    }
  });
}

template <Real T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require(w.rank() == 2, "linear weight must be rank 2");
  require(x.rank() >= 1 && x.dim(-1) == w.dim(0),
          "linear input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(w.shape()));
  const auto k = w.dim(0), n = w.dim(1);
  require(!bias.defined() || (bias.rank() == 1 && bias.dim(0) == n), "linear bias shape");
  const auto rows = x.numel() / k;
  std::vector<T> out(static_cast<std::size_t>(rows * n));
  auto y = cmap(out.data(), rows, n);
  y.noalias() = ccmap(x.data().data(), rows, k) * ccmap(w.data().data(), k, n);
  if (bias.defined()) y.rowwise() += crowvec(bias.data().data(), n);
  Shape shape = x.shape();
  shape.back() = n;
  return make_result<T>(std::move(shape), std::move(out), {x, w, bias},
                        [x, w, bias, rows, k, n](const detail::Node<T>& o) {
                          auto g = ccmap(o.grad.data(), rows, n);
                          if (T* gx = grad_target(x)) {
                            cmap(gx, rows, k).noalias() += g * ccmap(w.data().data(), k, n).transpose();
                          }
                          if (T* gw = grad_target(w)) {
                            cmap(gw, k, n).noalias() += ccmap(x.data().data(), rows, k).transpose() * g;
                          }
                          if (T* gb = grad_target(bias)) add_column_sums(gb, o.grad.data(), rows, n);
                        });
}

template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(is_suffix(a.shape(), b.shape()),
          "add: " + shape_str(b.shape()) + " does not broadcast onto " + shape_str(a.shape()));
  const auto inner = b.numel();
  const auto total = a.numel();
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  if (inner > 0) {
    for (std::int64_t i = 0; i < total; ++i) out[static_cast<std::size_t>(i)] += bd[static_cast<std::size_t>(i % inner)];
  }
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b, inner, total](const detail::Node<T>& o) {
    if (T* ga = grad_target(a)) {
      for (std::int64_t i = 0; i < total; ++i) ga[i] += o.grad[static_cast<std::size_t>(i)];
    }
    if (T* gb = grad_target(b)) {
      for (std::int64_t i = 0; i < total; ++i) gb[i % inner] += o.grad[static_cast<std::size_t>(i)];
    }
  });
}

template <Real T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](const detail::Node<T>& o) {
    if (T* ga = grad_target(a)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
    }
    if (T* gb = grad_target(b)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i] -= o.grad[i];
    }
  });
}

template <Real T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(is_suffix(a.shape(), b.shape()),
          "mul: " + shape_str(b.shape()) + " does not broadcast onto " + shape_str(a.shape()));
  const auto inner = b.numel();
  const auto total = a.numel();
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  if (inner > 0) {
    for (std::int64_t i = 0; i < total; ++i) out[static_cast<std::size_t>(i)] *= bd[static_cast<std::size_t>(i % inner)];
  }
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b, inner, total](const detail::Node<T>& o) {
    const auto ad = a.data();
    const auto bd = b.data();
    if (T* ga = grad_target(a)) {
      for (std::int64_t i = 0; i < total; ++i) ga[i] += o.grad[static_cast<std::size_t>(i)] * bd[static_cast<std::size_t>(i % inner)];
    }
    if (T* gb = grad_target(b)) {
      for (std::int64_t i = 0; i < total; ++i) gb[i % inner] += o.grad[static_cast<std::size_t>(i)] * ad[static_cast<std::size_t>(i)];
    }
  });
}

template <Real T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T v) { return v * factor; }, [factor](T) { return factor; });
}

template <Real T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <Real T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary(
      x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
      [](T v) {
        return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      });
}

template <Real T>
Tensor<T> silu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v / (T(1) + std::exp(-v)); },
      [](T v) {
        const T s = T(1) / (T(1) + std::exp(-v));
        return s * (T(1) + v * (T(1) - s));
      });
}

template <Real T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return make_result<T>({}, {acc}, {x}, [x](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      const T g = o.grad[0];
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    }
  });
}

template <Real T>
Tensor<T> mean(const Tensor<T>& x) {
  require(x.numel() > 0, "mean of empty tensor");
  T acc = T(0);
  for (T v : x.data()) acc += v;
  const T n = static_cast<T>(x.numel());
  return make_result<T>({}, {acc / n}, {x}, [x, n](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      const T g = o.grad[0] / n;
      for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    }
  });
}

template <Real T>
Tensor<T> variance(const Tensor<T>& x) {
  require(x.numel() > 0, "variance of empty tensor");
  const T n = static_cast<T>(x.numel());
  T mu = T(0);
  for (T v : x.data()) mu += v;
  mu /= n;
  T acc = T(0);
  for (T v : x.data()) acc += (v - mu) * (v - mu);
  return make_result<T>({}, {acc / n}, {x}, [x, n, mu](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      const T g = o.grad[0] * T(2) / n;
      const auto xs = x.data();
      for (std::size_t i = 0; i < xs.size(); ++i) gx[i] += g * (xs[i] - mu);
    }
  });
}

template <Real T>
Tensor<T> mean_axis(const Tensor<T>& x, std::int64_t axis) {
  axis = norm_axis(axis, x.rank());
  const auto sp = split_at(x.shape(), axis);
  require(sp.extent > 0, "mean over empty axis");
  std::vector<T> out(static_cast<std::size_t>(sp.outer * sp.inner), T(0));
  const auto xs = x.data();
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t e = 0; e < sp.extent; ++e)
      for (std::int64_t i = 0; i < sp.inner; ++i)
        out[static_cast<std::size_t>(o * sp.inner + i)] += xs[static_cast<std::size_t>((o * sp.extent + e) * sp.inner + i)];
  const T inv = T(1) / static_cast<T>(sp.extent);
  for (auto& v : out) v *= inv;
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  return make_result<T>(std::move(shape), std::move(out), {x}, [x, sp, inv](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      for (std::int64_t a = 0; a < sp.outer; ++a)
        for (std::int64_t e = 0; e < sp.extent; ++e)
          for (std::int64_t i = 0; i < sp.inner; ++i)
            gx[(a * sp.extent + e) * sp.inner + i] += o.grad[static_cast<std::size_t>(a * sp.inner + i)] * inv;
    }
  });
}

template <Real T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(std::move(shape), std::move(out), {x}, [x](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
    }
  });
}

namespace {

// For each output linear index, the input linear index under `axes`.
std::vector<std::int64_t> permutation_map(const Shape& in, const std::vector<std::int64_t>& axes) {
  const std::size_t r = in.size();
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out(r);
  std::vector<std::int64_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out[i] = in[static_cast<std::size_t>(axes[i])];
    stride[i] = in_stride[static_cast<std::size_t>(axes[i])];
  }
  const auto n = shape_numel(in);
  std::vector<std::int64_t> map(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t src = 0;
  for (std::int64_t lin = 0; lin < n; ++lin) {
    map[static_cast<std::size_t>(lin)] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      src += stride[d];
      if (idx[d] < out[d]) break;
      src -= stride[d] * out[d];
      idx[d] = 0;
    }
  }
  return map;
}

}  // namespace

template <Real T>
Tensor<T> permute(const Tensor<T>& x, std::vector<std::int64_t> axes) {
  const auto r = x.rank();
  require(static_cast<std::int64_t>(axes.size()) == r, "permute: wrong number of axes");
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (auto& a : axes) {
    a = norm_axis(a, r);
    require(!seen[static_cast<std::size_t>(a)], "permute: repeated axis");
    seen[static_cast<std::size_t>(a)] = true;
  }
  auto map = permutation_map(x.shape(), axes);
  Shape shape(static_cast<std::size_t>(r));
  for (std::size_t i = 0; i < shape.size(); ++i) shape[i] = x.shape()[static_cast<std::size_t>(axes[i])];
  std::vector<T> out(map.size());
  const auto xs = x.data();
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = xs[static_cast<std::size_t>(map[i])];
  return make_result<T>(std::move(shape), std::move(out), {x}, [x, map = std::move(map)](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += o.grad[i];
    }
  });
}

template <Real T>
Tensor<T> transpose(const Tensor<T>& x) {
  require(x.rank() >= 2, "transpose needs rank >= 2");
  std::vector<std::int64_t> axes(static_cast<std::size_t>(x.rank()));
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<std::int64_t>(i);
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(x, std::move(axes));
}

template <Real T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis) {
  require(!parts.empty(), "concat of nothing");
  const auto r = parts.front().rank();
  axis = norm_axis(axis, r);
  Shape shape = parts.front().shape();
  shape[static_cast<std::size_t>(axis)] = 0;
  for (const auto& p : parts) {
    require(p.rank() == r, "concat: rank mismatch");
    for (std::int64_t d = 0; d < r; ++d) {
      if (d != axis) require(p.dim(d) == shape[static_cast<std::size_t>(d)], "concat: extent mismatch off-axis");
    }
    shape[static_cast<std::size_t>(axis)] += p.dim(axis);
  }
  const auto sp = split_at(shape, axis);
  std::vector<T> out(static_cast<std::size_t>(shape_numel(shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto len = p.dim(axis) * sp.inner;
    const auto pd = p.data();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      std::copy_n(pd.begin() + o * len, len, out.begin() + o * sp.extent * sp.inner + off);
    }
    off += len;
  }
  return make_result<T>(std::move(shape), std::move(out), std::span<const Tensor<T>>(parts),
                                     [parts, offsets, sp, axis](const detail::Node<T>& o) {
                                       for (std::size_t k = 0; k < parts.size(); ++k) {
                                         T* gp = grad_target(parts[k]);
                                         if (!gp) continue;
                                         const auto len = parts[k].dim(axis) * sp.inner;
                                         for (std::int64_t a = 0; a < sp.outer; ++a)
                                           for (std::int64_t i = 0; i < len; ++i)
                                             gp[a * len + i] += o.grad[static_cast<std::size_t>(a * sp.extent * sp.inner + offsets[k] + i)];
                                       }
                                     });
}

template <Real T>
Tensor<T> slice(const Tensor<T>& x, std::int64_t axis, std::int64_t start, std::int64_t stop) {
  axis = norm_axis(axis, x.rank());
  const auto sp = split_at(x.shape(), axis);
  require(0 <= start && start <= stop && stop <= sp.extent, "slice bounds out of range");
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = stop - start;
  const auto len = (stop - start) * sp.inner;
  std::vector<T> out(static_cast<std::size_t>(sp.outer * len));
  const auto xs = x.data();
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    std::copy_n(xs.begin() + (o * sp.extent + start) * sp.inner, len, out.begin() + o * len);
  }
  return make_result<T>(std::move(shape), std::move(out), {x}, [x, sp, start, len](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      for (std::int64_t a = 0; a < sp.outer; ++a)
        for (std::int64_t i = 0; i < len; ++i)
          gx[(a * sp.extent + start) * sp.inner + i] += o.grad[static_cast<std::size_t>(a * len + i)];
    }
  });
}

template <Real T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int64_t> rows) {
  require(x.rank() >= 1, "gather_rows on scalar");
  const auto n = x.dim(0);
  const auto width = n > 0 ? x.numel() / n : 0;
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  for (auto r : idx) require(r >= 0 && r < n, "gather_rows index out of range");
  Shape shape = x.shape();
  shape[0] = static_cast<std::int64_t>(idx.size());
  std::vector<T> out(idx.size() * static_cast<std::size_t>(width));
  const auto xs = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(xs.begin() + idx[i] * width, width, out.begin() + static_cast<std::int64_t>(i) * width);
  }
  return make_result<T>(std::move(shape), std::move(out), {x}, [x, idx = std::move(idx), width](const detail::Node<T>& o) {
    if (T* gx = grad_target(x)) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::int64_t j = 0; j < width; ++j)
          gx[idx[i] * width + j] += o.grad[i * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
    }
  });
}

template <Real T>
Tensor<T> softmax(const Tensor<T>& x) {
  require(x.rank() >= 1 && x.dim(-1) >= 1, "softmax over empty axis");
  const auto n = x.dim(-1);
  const auto rows = x.numel() / n;
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::int64_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T s = T(0);
    for (std::int64_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::int64_t j = 0; j < n; ++j) row[j] /= s;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [x, rows, n](const detail::Node<T>& o) {
    T* gx = grad_target(x);
    if (!gx) return;
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* y = o.data.data() + r * n;
      const T* g = o.grad.data() + r * n;
      T dot = T(0);
      for (std::int64_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::int64_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - dot);
    }
  });
}

template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  require(x.rank() >= 1 && x.dim(-1) >= 1, "layer_norm over empty axis");
  const auto d = x.dim(-1);
  const auto rows = x.numel() / d;
  require(!gamma.defined() || (gamma.rank() == 1 && gamma.dim(0) == d), "layer_norm gamma shape");
  require(!beta.defined() || (beta.rank() == 1 && beta.dim(0) == d), "layer_norm beta shape");
  std::vector<T> xhat(static_cast<std::size_t>(x.numel()));
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  const auto xs = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xs.data() + r * d;
    T mu = T(0);
    for (std::int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[static_cast<std::size_t>(r)] = rs;
    for (std::int64_t j = 0; j < d; ++j) xhat[static_cast<std::size_t>(r * d + j)] = (row[j] - mu) * rs;
  }
  std::vector<T> out = xhat;
  if (gamma.defined() || beta.defined()) {
    const auto gd = gamma.defined() ? gamma.data() : std::span<const T>{};
    const auto bd = beta.defined() ? beta.data() : std::span<const T>{};
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < d; ++j) {
        T& v = out[static_cast<std::size_t>(r * d + j)];
        if (!gd.empty()) v *= gd[static_cast<std::size_t>(j)];
        if (!bd.empty()) v += bd[static_cast<std::size_t>(j)];
      }
  }
  return make_result<T>(x.shape(), std::move(out), {x, gamma, beta},
                        [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](const detail::Node<T>& o) {
                          const T* g = o.grad.data();
                          const auto gd = gamma.defined() ? gamma.data() : std::span<const T>{};
                          if (T* gg = grad_target(gamma)) {
                            for (std::int64_t r = 0; r < rows; ++r)
                              for (std::int64_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[static_cast<std::size_t>(r * d + j)];
                          }
                          if (T* gb = grad_target(beta)) {
                            for (std::int64_t r = 0; r < rows; ++r)
                              for (std::int64_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
                          }
                          T* gx = grad_target(x);
                          if (!gx) return;
                          std::vector<T> gh(static_cast<std::size_t>(d));
                          for (std::int64_t r = 0; r < rows; ++r) {
                            T m1 = T(0), m2 = T(0);
                            for (std::int64_t j = 0; j < d; ++j) {
                              const T v = g[r * d + j] * (gd.empty() ? T(1) : gd[static_cast<std::size_t>(j)]);
                              gh[static_cast<std::size_t>(j)] = v;
                              m1 += v;
                              m2 += v * xhat[static_cast<std::size_t>(r * d + j)];
                            }
                            m1 /= static_cast<T>(d);
                            m2 /= static_cast<T>(d);
                            const T rs = rstd[static_cast<std::size_t>(r)];
                            for (std::int64_t j = 0; j < d; ++j)
                              gx[r * d + j] += rs * (gh[static_cast<std::size_t>(j)] - m1 - xhat[static_cast<std::size_t>(r * d + j)] * m2);
                          }
                        });
}

template <Real T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::int64_t heads) {
  require(q.rank() == 3 && k.rank() == 3 && v.rank() == 3, "attention expects [B x N x d] operands");
  const auto B = q.dim(0), nq = q.dim(1), d = q.dim(2), nk = k.dim(1);
  require(k.dim(0) == B && v.dim(0) == B && k.dim(2) == d && v.dim(2) == d && v.dim(1) == nk,
          "attention operand shapes disagree");
  require(heads >= 1 && d % heads == 0, "attention: width not divisible by head count");
  const auto dh = d / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> out(static_cast<std::size_t>(B * nq * d));
  std::vector<T> probs(static_cast<std::size_t>(B * heads * nq * nk));
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t h = 0; h < heads; ++h) {
      auto Q = cstrided(q.data().data() + b * nq * d + h * dh, nq, dh, d);
      auto K = cstrided(k.data().data() + b * nk * d + h * dh, nk, dh, d);
      auto V = cstrided(v.data().data() + b * nk * d + h * dh, nk, dh, d);
      auto P = cmap(probs.data() + (b * heads + h) * nq * nk, nq, nk);
      P.noalias() = (Q * K.transpose()) * sc;
      for (std::int64_t i = 0; i < nq; ++i) {
        auto row = P.row(i);
        const T mx = row.maxCoeff();
        T total = T(0);
        for (std::int64_t j = 0; j < nk; ++j) {
          row(j) = std::exp(row(j) - mx);
          total += row(j);
        }
        row /= total;
      }
      strided(out.data() + b * nq * d + h * dh, nq, dh, d).noalias() = P * V;
    }
  }
  return make_result<T>({B, nq, d}, std::move(out), {q, k, v},
                        [q, k, v, probs = std::move(probs), B, nq, nk, d, heads, dh, sc](const detail::Node<T>& o) {
                          T* gq = grad_target(q);
                          T* gk = grad_target(k);
                          T* gv = grad_target(v);
                          RowMat<T> dP(nq, nk);
                          for (std::int64_t b = 0; b < B; ++b) {
                            for (std::int64_t h = 0; h < heads; ++h) {
                              const auto off_q = b * nq * d + h * dh;
                              const auto off_k = b * nk * d + h * dh;
                              auto dO = cstrided(o.grad.data() + off_q, nq, dh, d);
                              auto P = ccmap(probs.data() + (b * heads + h) * nq * nk, nq, nk);
                              if (gv) strided(gv + off_k, nk, dh, d).noalias() += P.transpose() * dO;
                              if (!gq && !gk) continue;
                              dP.noalias() = dO * cstrided(v.data().data() + off_k, nk, dh, d).transpose();
                              for (std::int64_t i = 0; i < nq; ++i) {
                                T dot = T(0);
                                for (std::int64_t j = 0; j < nk; ++j) dot += dP(i, j) * P(i, j);
                                dP.row(i) = (P.row(i).array() * (dP.row(i).array() - dot)).matrix();
                              }
                              if (gq) strided(gq + off_q, nq, dh, d).noalias() += (dP * cstrided(k.data().data() + off_k, nk, dh, d)) * sc;
                              if (gk) strided(gk + off_k, nk, dh, d).noalias() += (dP.transpose() * cstrided(q.data().data() + off_q, nq, dh, d)) * sc;
                            }
                          }
                        });
}

template <Real T>
Tensor<T> substitute_rows(const Tensor<T>& tokens, std::span<const std::uint8_t> active, const Tensor<T>& fill) {
  require(tokens.rank() >= 2, "substitute_rows expects [.. x N x d] tokens");
  const auto d = tokens.dim(-1);
  const auto rows = tokens.numel() / d;
  require(static_cast<std::int64_t>(active.size()) == rows,
          "substitute_rows: activity has " + std::to_string(active.size()) + " entries, tokens have " +
              std::to_string(rows) + " rows");
  require(fill.rank() == 1 && fill.dim(0) == d, "substitute_rows: fill width mismatch");
  std::vector<T> out(tokens.data().begin(), tokens.data().end());
  const auto fd = fill.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!active[static_cast<std::size_t>(r)]) std::copy(fd.begin(), fd.end(), out.begin() + r * d);
  }
  std::vector<std::uint8_t> act(active.begin(), active.end());
  return make_result<T>(tokens.shape(), std::move(out), {tokens, fill},
                        [tokens, fill, act = std::move(act), rows, d](const detail::Node<T>& o) {
                          T* gt = grad_target(tokens);
                          T* gf = grad_target(fill);
                          for (std::int64_t r = 0; r < rows; ++r) {
                            const T* g = o.grad.data() + r * d;
                            if (act[static_cast<std::size_t>(r)]) {
                              if (gt)
                                for (std::int64_t j = 0; j < d; ++j) gt[r * d + j] += g[j];
                            } else if (gf) {
                              for (std::int64_t j = 0; j < d; ++j) gf[j] += g[j];
                            }
                          }
                        });
}

template <Real T>
Tensor<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta) {
  require(pred.shape() == target.shape(),
          "smooth_l1 shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  if (!(beta > T(0))) throw ContractError("smooth_l1 beta must be positive");
  require(pred.numel() > 0, "smooth_l1 over zero elements");
  const auto p = pred.data();
  const auto t = target.data();
  T acc = T(0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T r = p[i] - t[i];
    const T a = std::abs(r);
    acc += a < beta ? T(0.5) * r * r / beta : a - T(0.5) * beta;
  }
  const T n = static_cast<T>(p.size());
  // Target is treated as a constant.
  return make_result<T>({}, {acc / n}, {pred}, [pred, tgt = target.detach(), beta, n](const detail::Node<T>& o) {
    T* gp = grad_target(pred);
    if (!gp) return;
    const T g = o.grad[0] / n;
    const auto p = pred.data();
    const auto t = tgt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T r = p[i] - t[i];
      const T dr = std::abs(r) < beta ? r / beta : (r > T(0) ? T(1) : T(-1));
      gp[i] += g * dr;
    }
  });
}

template <Real T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> labels) {
  require(logits.rank() == 2, "cross_entropy expects [B x C] logits");
  const auto B = logits.dim(0), C = logits.dim(1);
  require(static_cast<std::int64_t>(labels.size()) == B, "cross_entropy: label count mismatch");
  require(B > 0, "cross_entropy over empty batch");
  std::vector<T> prob(logits.data().begin(), logits.data().end());
  T loss = T(0);
  std::vector<std::int64_t> lab(labels.begin(), labels.end());
  for (std::int64_t b = 0; b < B; ++b) {
    require(lab[static_cast<std::size_t>(b)] >= 0 && lab[static_cast<std::size_t>(b)] < C, "cross_entropy: label out of range");
    T* row = prob.data() + b * C;
    const T mx = *std::max_element(row, row + C);
    T s = T(0);
    for (std::int64_t c = 0; c < C; ++c) s += std::exp(row[c] - mx);
    const T lse = mx + std::log(s);
    loss += lse - row[lab[static_cast<std::size_t>(b)]];
    for (std::int64_t c = 0; c < C; ++c) row[c] = std::exp(row[c] - lse);
  }
  return make_result<T>({}, {loss / static_cast<T>(B)}, {logits},
                        [logits, prob = std::move(prob), lab = std::move(lab), B, C](const detail::Node<T>& o) {
                          T* gl = grad_target(logits);
                          if (!gl) return;
                          const T g = o.grad[0] / static_cast<T>(B);
                          for (std::int64_t b = 0; b < B; ++b)
                            for (std::int64_t c = 0; c < C; ++c) {
                              const T target = c == lab[static_cast<std::size_t>(b)] ? T(1) : T(0);
                              gl[b * C + c] += g * (prob[static_cast<std::size_t>(b * C + c)] - target);
                            }
                        });
}

#define SCOTT_INSTANTIATE_OPS(T)                                                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> relu(const Tensor<T>&);                                                         \
  template Tensor<T> gelu(const Tensor<T>&);                                                         \
  template Tensor<T> silu(const Tensor<T>&);                                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                          \
  template Tensor<T> mean(const Tensor<T>&);                                                         \
  template Tensor<T> variance(const Tensor<T>&);                                                     \
  template Tensor<T> mean_axis(const Tensor<T>&, std::int64_t);                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                               \
  template Tensor<T> permute(const Tensor<T>&, std::vector<std::int64_t>);                           \
  template Tensor<T> transpose(const Tensor<T>&);                                                    \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::int64_t);                            \
  template Tensor<T> slice(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);              \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::int64_t>);                   \
  template Tensor<T> softmax(const Tensor<T>&);                                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);            \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::int64_t);  \
  template Tensor<T> substitute_rows(const Tensor<T>&, std::span<const std::uint8_t>, const Tensor<T>&); \
  template Tensor<T> smooth_l1(const Tensor<T>&, const Tensor<T>&, T);                               \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::int64_t>);

SCOTT_INSTANTIATE_OPS(float)
SCOTT_INSTANTIATE_OPS(double)

}  // namespace scott::ops
