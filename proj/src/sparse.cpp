#include "scott/sparse.hpp"

#include <algorithm>
#include <limits>

#include "eigen_maps.hpp"
#include "scott/ops.hpp"

namespace scott {

using detail::grad_target;
using detail::make_result;

ActivityMap ActivityMap::full(std::int64_t batch, std::int64_t height, std::int64_t width, std::uint8_t value) {
  ActivityMap a;
  a.batch = batch;
  a.height = height;
  a.width = width;
  a.cells.assign(static_cast<std::size_t>(batch * height * width), value);
  return a;
}

std::int64_t ActivityMap::count_active() const {
  return std::count(cells.begin(), cells.end(), std::uint8_t{1});
}

template <Real T>
MaskedFeatureMap<T> dense_map(const Tensor<T>& features_nhwc) {
  if (features_nhwc.rank() != 4) throw DimensionError("feature maps are [B x H x W x C]");
  return {features_nhwc, ActivityMap::full(features_nhwc.dim(0), features_nhwc.dim(1), features_nhwc.dim(2))};
}

template <Real T>
Tensor<T> to_channels_last(const Tensor<T>& nchw) {
  if (nchw.rank() != 4) throw DimensionError("expected [B x C x H x W], got " + shape_str(nchw.shape()));
  return ops::permute(nchw, {0, 2, 3, 1});
}

template <Real T>
Tensor<T> to_channels_first(const Tensor<T>& nhwc) {
  if (nhwc.rank() != 4) throw DimensionError("expected [B x H x W x C], got " + shape_str(nhwc.shape()));
  return ops::permute(nhwc, {0, 3, 1, 2});
}

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  const auto span = in + 2 * padding - kernel;
  if (span < 0) throw GeometryError("window larger than padded input");
  return span / stride + 1;
}

ActivityMap propagate_activity(const ActivityMap& in, std::int64_t kernel, std::int64_t stride,
                               std::int64_t padding) {
  ActivityMap out;
  out.batch = in.batch;
  out.height = conv_out_extent(in.height, kernel, stride, padding);
  out.width = conv_out_extent(in.width, kernel, stride, padding);
  out.cells.assign(static_cast<std::size_t>(out.batch * out.height * out.width), 0);
  const auto half = kernel / 2;
  for (std::int64_t b = 0; b < out.batch; ++b)
    for (std::int64_t i = 0; i < out.height; ++i)
      for (std::int64_t j = 0; j < out.width; ++j) {
        const auto cy = stride * i - padding + half;
        const auto cx = stride * j - padding + half;
        if (cy < 0 || cy >= in.height || cx < 0 || cx >= in.width) continue;
        out.cells[static_cast<std::size_t>((b * out.height + i) * out.width + j)] = in.at(b, cy, cx);
      }
  return out;
}

template <Real T>
MaskedFeatureMap<T> sparse_conv2d(const MaskedFeatureMap<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                                  std::int64_t stride, std::int64_t padding) {
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw DimensionError("conv weight must be [Cout x Cin x K x K], got " + shape_str(weight.shape()));
  }
  const auto B = x.batch(), H = x.height(), W = x.width(), cin = x.channels();
  const auto cout = weight.dim(0), K = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw DimensionError("conv expects " + std::to_string(weight.dim(1)) + " input channels, got " +
                         std::to_string(cin));
  }
  if (K % 2 == 0) throw DimensionError("sparse convolution needs an odd kernel");
  if (stride < 1 || padding < 0) throw DimensionError("invalid stride/padding");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) throw DimensionError("conv bias shape");

  ActivityMap act = propagate_activity(x.active, K, stride, padding);
  const auto Ho = act.height, Wo = act.width;
  const auto patch = K * K * cin;

  // Active output cells, as flat [B x Ho x Wo] indices.
  std::vector<std::int64_t> rows;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(act.cells.size()); ++i)
    if (act.cells[static_cast<std::size_t>(i)]) rows.push_back(i);
  const auto R = static_cast<std::int64_t>(rows.size());

  // Gather active input neighbourhoods, ordered (ky, kx, c).
  std::vector<T> cols(static_cast<std::size_t>(R * patch), T(0));
  const T* xd = x.features.data().data();
  for (std::int64_t r = 0; r < R; ++r) {
    const auto idx = rows[static_cast<std::size_t>(r)];
    const auto b = idx / (Ho * Wo), oy = (idx / Wo) % Ho, ox = idx % Wo;
    T* dst = cols.data() + r * patch;
    for (std::int64_t ky = 0; ky < K; ++ky) {
      const auto iy = stride * oy - padding + ky;
      if (iy < 0 || iy >= H) continue;
      for (std::int64_t kx = 0; kx < K; ++kx) {
        const auto ix = stride * ox - padding + kx;
        if (ix < 0 || ix >= W || !x.active.at(b, iy, ix)) continue;
        std::copy_n(xd + ((b * H + iy) * W + ix) * cin, cin, dst + (ky * K + kx) * cin);
      }
    }
  }

  // weight[o, c, ky, kx] → wt[(ky, kx, c), o]
  RowMat<T> wt(patch, cout);
  const T* wd = weight.data().data();
  for (std::int64_t o = 0; o < cout; ++o)
    for (std::int64_t c = 0; c < cin; ++c)
      for (std::int64_t k = 0; k < K * K; ++k) wt((k * cin) + c, o) = wd[(o * cin + c) * K * K + k];

  RowMat<T> res(R, cout);
  res.noalias() = ccmap(cols.data(), R, patch) * wt;
  if (bias.defined()) res.rowwise() += crowvec(bias.data().data(), cout);

  std::vector<T> out(static_cast<std::size_t>(B * Ho * Wo * cout), T(0));
  for (std::int64_t r = 0; r < R; ++r) {
    std::copy_n(res.data() + r * cout, cout, out.data() + rows[static_cast<std::size_t>(r)] * cout);
  }

  auto feat = make_result<T>(
      {B, Ho, Wo, cout}, std::move(out), {x.features, weight, bias},
      [xf = x.features, in_act = x.active, weight, bias, rows = std::move(rows), cols = std::move(cols),
       wt = std::move(wt), B, H, W, cin, cout, K, Ho, Wo, stride, padding, patch](const detail::Node<T>& o) {
        const auto R = static_cast<std::int64_t>(rows.size());
        RowMat<T> g(R, cout);
        for (std::int64_t r = 0; r < R; ++r) {
          std::copy_n(o.grad.data() + rows[static_cast<std::size_t>(r)] * cout, cout, g.data() + r * cout);
        }
        if (T* gb = grad_target(bias)) add_column_sums(gb, g.data(), R, cout);
        if (T* gw = grad_target(weight)) {
          RowMat<T> dwt(patch, cout);
          dwt.noalias() = ccmap(cols.data(), R, patch).transpose() * g;
          for (std::int64_t oc = 0; oc < cout; ++oc)
            for (std::int64_t c = 0; c < cin; ++c)
              for (std::int64_t k = 0; k < K * K; ++k) gw[(oc * cin + c) * K * K + k] += dwt(k * cin + c, oc);
        }
        if (T* gx = grad_target(xf)) {
          RowMat<T> dcols(R, patch);
          dcols.noalias() = g * wt.transpose();
          for (std::int64_t r = 0; r < R; ++r) {
            const auto idx = rows[static_cast<std::size_t>(r)];
            const auto b = idx / (Ho * Wo), oy = (idx / Wo) % Ho, ox = idx % Wo;
            const T* src = dcols.data() + r * patch;
            for (std::int64_t ky = 0; ky < K; ++ky) {
              const auto iy = stride * oy - padding + ky;
              if (iy < 0 || iy >= H) continue;
              for (std::int64_t kx = 0; kx < K; ++kx) {
                const auto ix = stride * ox - padding + kx;
                if (ix < 0 || ix >= W || !in_act.at(b, iy, ix)) continue;
                T* dst = gx + ((b * H + iy) * W + ix) * cin;
                const T* s = src + (ky * K + kx) * cin;
                for (std::int64_t c = 0; c < cin; ++c) dst[c] += s[c];
              }
            }
          }
        }
      });
  return {std::move(feat), std::move(act)};
}

template <Real T>
MaskedFeatureMap<T> sparse_relu(const MaskedFeatureMap<T>& x) {
  // Inactive cells hold exact zeros, which relu maps to zero.
  return {ops::relu(x.features), x.active};
}

template <Real T>
MaskedFeatureMap<T> sparse_max_blur_pool(const MaskedFeatureMap<T>& x, std::int64_t kernel, std::int64_t stride) {
  if (kernel != 3 || stride != 2) {
    throw ContractError("max-blur-pool supports kernel 3, stride 2 only");
  }
  const auto B = x.batch(), H = x.height(), W = x.width(), C = x.channels();
  ActivityMap act = propagate_activity(x.active, 3, 2, 1);
  const auto Ho = act.height, Wo = act.width;
  const T* xd = x.features.data().data();

  // Stride-1 max over active neighbours; argmax holds the winning flat pixel (b*H + y)*W + x.
  std::vector<T> pooled(static_cast<std::size_t>(B * H * W * C), T(0));
  std::vector<std::int32_t> argmax(pooled.size(), -1);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t xx = 0; xx < W; ++xx) {
        if (!x.active.at(b, y, xx)) continue;
        const auto base = ((b * H + y) * W + xx) * C;
        T* m = pooled.data() + base;
        std::int32_t* a = argmax.data() + base;
        std::fill_n(m, C, -std::numeric_limits<T>::infinity());
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          const auto yy = y + dy;
          if (yy < 0 || yy >= H) continue;
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const auto xq = xx + dx;
            if (xq < 0 || xq >= W || !x.active.at(b, yy, xq)) continue;
            const auto pix = (b * H + yy) * W + xq;
            const T* v = xd + pix * C;
            for (std::int64_t c = 0; c < C; ++c) {
              if (v[c] > m[c]) {
                m[c] = v[c];
                a[c] = static_cast<std::int32_t>(pix);
              }
            }
          }
        }
      }

  // Normalised binomial blur at stride 2 over active taps.
  constexpr T tap[3] = {T(1), T(2), T(1)};
  std::vector<T> out(static_cast<std::size_t>(B * Ho * Wo * C), T(0));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < Ho; ++i)
      for (std::int64_t j = 0; j < Wo; ++j) {
        if (!act.at(b, i, j)) continue;
        T* o = out.data() + ((b * Ho + i) * Wo + j) * C;
        T wsum = T(0);
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          const auto y = 2 * i + dy;
          if (y < 0 || y >= H) continue;
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const auto xx = 2 * j + dx;
            if (xx < 0 || xx >= W || !x.active.at(b, y, xx)) continue;
            const T w = tap[dy + 1] * tap[dx + 1];
            wsum += w;
            const T* m = pooled.data() + ((b * H + y) * W + xx) * C;
            for (std::int64_t c = 0; c < C; ++c) o[c] += w * m[c];
          }
        }
        const T inv = T(1) / wsum;
        for (std::int64_t c = 0; c < C; ++c) o[c] *= inv;
      }

  auto feat = make_result<T>(
      {B, Ho, Wo, C}, std::move(out), {x.features},
      [xf = x.features, in_act = x.active, out_act = act, argmax = std::move(argmax), B, H, W, C, Ho,
       Wo](const detail::Node<T>& o) {
        T* gx = grad_target(xf);
        if (!gx) return;
        constexpr T tap[3] = {T(1), T(2), T(1)};
        for (std::int64_t b = 0; b < B; ++b)
          for (std::int64_t i = 0; i < Ho; ++i)
            for (std::int64_t j = 0; j < Wo; ++j) {
              if (!out_act.at(b, i, j)) continue;
              const T* g = o.grad.data() + ((b * Ho + i) * Wo + j) * C;
              T wsum = T(0);
              for (std::int64_t dy = -1; dy <= 1; ++dy) {
                const auto y = 2 * i + dy;
                if (y < 0 || y >= H) continue;
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                  const auto xx = 2 * j + dx;
                  if (xx < 0 || xx >= W || !in_act.at(b, y, xx)) continue;
                  wsum += tap[dy + 1] * tap[dx + 1];
                }
              }
              for (std::int64_t dy = -1; dy <= 1; ++dy) {
                const auto y = 2 * i + dy;
                if (y < 0 || y >= H) continue;
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                  const auto xx = 2 * j + dx;
                  if (xx < 0 || xx >= W || !in_act.at(b, y, xx)) continue;
                  const T w = tap[dy + 1] * tap[dx + 1] / wsum;
                  const std::int32_t* a = argmax.data() + ((b * H + y) * W + xx) * C;
                  for (std::int64_t c = 0; c < C; ++c) gx[static_cast<std::int64_t>(a[c]) * C + c] += w * g[c];
                }
              }
            }
      });
  return {std::move(feat), std::move(act)};
}

template <Real T>
MaskedFeatureMap<T> mask_to_pixel_holes(const Tensor<T>& images_nhwc, std::span<const MaskSet> masks,
                                        std::int64_t patch) {
  if (images_nhwc.rank() != 4) throw DimensionError("images must be [B x H x W x C]");
  const auto B = images_nhwc.dim(0), H = images_nhwc.dim(1), W = images_nhwc.dim(2), C = images_nhwc.dim(3);
  if (patch < 1 || H % patch != 0 || W % patch != 0) {
    throw GeometryError("image " + std::to_string(H) + "x" + std::to_string(W) +
                        " is not divisible into " + std::to_string(patch) + "-pixel patches");
  }
  if (static_cast<std::int64_t>(masks.size()) != B) throw DimensionError("one MaskSet per image required");
  const auto gh = H / patch, gw = W / patch;
  ActivityMap act = ActivityMap::full(B, H, W);
  std::vector<T> keep(static_cast<std::size_t>(B * H * W * C), T(1));
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& m = masks[static_cast<std::size_t>(b)];
    if (m.grid_h != gh || m.grid_w != gw) {
      throw GeometryError("mask grid " + std::to_string(m.grid_h) + "x" + std::to_string(m.grid_w) +
                          " does not match image patch grid " + std::to_string(gh) + "x" + std::to_string(gw));
    }
    for (auto idx : m.masked) {
      const auto pr = idx / gw, pc = idx % gw;
      for (std::int64_t y = pr * patch; y < (pr + 1) * patch; ++y)
        for (std::int64_t x = pc * patch; x < (pc + 1) * patch; ++x) {
          act.cells[static_cast<std::size_t>((b * H + y) * W + x)] = 0;
          std::fill_n(keep.begin() + ((b * H + y) * W + x) * C, C, T(0));
        }
    }
  }
  // Multiplying by a constant 0/1 tensor gives exact zeros and zero gradient inside holes.
  Tensor<T> keep_t({B, H, W, C}, std::move(keep));
  return {ops::mul(images_nhwc, keep_t), std::move(act)};
}

template <Real T>
MaskedFeatureMap<T> mask_to_pixel_holes(const Tensor<T>& image_chw, const MaskSet& mask, std::int64_t patch) {
  if (image_chw.rank() != 3) throw DimensionError("image must be [C x H x W]");
  auto batched = ops::reshape(image_chw, {1, image_chw.dim(0), image_chw.dim(1), image_chw.dim(2)});
  return mask_to_pixel_holes(to_channels_last(batched), std::span<const MaskSet>(&mask, 1), patch);
}

#define SCOTT_INSTANTIATE_SPARSE(T)                                                                          \
  template MaskedFeatureMap<T> dense_map(const Tensor<T>&);                                                  \
  template Tensor<T> to_channels_last(const Tensor<T>&);                                                     \
  template Tensor<T> to_channels_first(const Tensor<T>&);                                                    \
  template MaskedFeatureMap<T> sparse_conv2d(const MaskedFeatureMap<T>&, const Tensor<T>&, const Tensor<T>&, \
                                             std::int64_t, std::int64_t);                                    \
  template MaskedFeatureMap<T> sparse_relu(const MaskedFeatureMap<T>&);                                      \
  template MaskedFeatureMap<T> sparse_max_blur_pool(const MaskedFeatureMap<T>&, std::int64_t, std::int64_t); \
  template MaskedFeatureMap<T> mask_to_pixel_holes(const Tensor<T>&, std::span<const MaskSet>, std::int64_t); \
  template MaskedFeatureMap<T> mask_to_pixel_holes(const Tensor<T>&, const MaskSet&, std::int64_t);

SCOTT_INSTANTIATE_SPARSE(float)
SCOTT_INSTANTIATE_SPARSE(double)

}  // namespace scott
