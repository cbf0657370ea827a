#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scott/masking.hpp"
#include "scott/tensor.hpp"

namespace scott {

/// Binary occupancy of a batch of spatial maps, [B × H × W], 1 = non-empty.
struct ActivityMap {
  std::int64_t batch = 0, height = 0, width = 0;
  std::vector<std::uint8_t> cells;

  static ActivityMap full(std::int64_t batch, std::int64_t height, std::int64_t width, std::uint8_t value = 1);

  std::uint8_t at(std::int64_t b, std::int64_t y, std::int64_t x) const {
    return cells[static_cast<std::size_t>((b * height + y) * width + x)];
  }
  std::int64_t count_active() const;
  bool operator==(const ActivityMap&) const = default;
};

/// Feature map paired with its activity map.
///
/// Features are channels-last, [B × H × W × C], and exactly zero wherever the
/// activity map is 0. A fully active map is an ordinary dense tensor.
template <Real T>
struct MaskedFeatureMap {
  Tensor<T> features;
  ActivityMap active;

  std::int64_t batch() const { return features.dim(0); }
  std::int64_t height() const { return features.dim(1); }
  std::int64_t width() const { return features.dim(2); }
  std::int64_t channels() const { return features.dim(3); }
};

/// Wrap a dense channels-last tensor as a fully active map.
template <Real T>
MaskedFeatureMap<T> dense_map(const Tensor<T>& features_nhwc);

/// [B × C × H × W] → [B × H × W × C] (differentiable).
template <Real T>
Tensor<T> to_channels_last(const Tensor<T>& nchw);

/// [B × H × W × C] → [B × C × H × W] (differentiable).
template <Real T>
Tensor<T> to_channels_first(const Tensor<T>& nhwc);

/// Output extent of a K-wide window with the given stride and padding.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::int64_t padding);

/// Kernel-centre rule: output (i, j) is active iff the input cell under the
/// kernel centre, (stride·i − padding + K/2, stride·j − padding + K/2), lies in
/// the image and is active.
ActivityMap propagate_activity(const ActivityMap& in, std::int64_t kernel, std::int64_t stride,
                               std::int64_t padding);

/// Submanifold sparse convolution. weight[Cout × Cin × K × K], bias[Cout]
/// (bias may be undefined). Computes only at active outputs; inactive inputs
/// contribute nothing and receive no gradient.
template <Real T>
MaskedFeatureMap<T> sparse_conv2d(const MaskedFeatureMap<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                                  std::int64_t stride, std::int64_t padding);

/// ReLU on active cells; activity unchanged.
template <Real T>
MaskedFeatureMap<T> sparse_relu(const MaskedFeatureMap<T>& x);

/// Stride-1 3×3 max pool over active neighbours, then a [1,2,1]⊗[1,2,1] blur
/// renormalised over active in-image taps, sampled at stride 2. Only
/// kernel = 3, stride = 2 is supported.
template <Real T>
MaskedFeatureMap<T> sparse_max_blur_pool(const MaskedFeatureMap<T>& x, std::int64_t kernel = 3,
                                         std::int64_t stride = 2);

/// Pixel-level activity from patch masks: every pixel of every masked
/// patch×patch cell becomes inactive (and zero). images is [B × H × W × C];
/// masks holds one MaskSet per image whose grid must equal (H/patch, W/patch).
template <Real T>
MaskedFeatureMap<T> mask_to_pixel_holes(const Tensor<T>& images_nhwc, std::span<const MaskSet> masks,
                                        std::int64_t patch);

/// Single image convenience: image[C × H × W] (channels-first) and one mask.
template <Real T>
MaskedFeatureMap<T> mask_to_pixel_holes(const Tensor<T>& image_chw, const MaskSet& mask, std::int64_t patch);

}  // namespace scott
