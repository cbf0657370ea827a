#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "scott/image.hpp"
#include "scott/rng.hpp"
#include "scott/tensor.hpp"

namespace scott {

enum class ViewStrategy { kNone, kSame, kDifferent };

ViewStrategy parse_view_strategy(const std::string& name);
std::string to_string(ViewStrategy s);

struct AugmentConfig {
  double crop_area_min = 0.2;
  double crop_area_max = 1.0;
  double aspect_min = 3.0 / 4.0;
  double aspect_max = 4.0 / 3.0;
  double hflip_p = 0.5;
  double jitter_p = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.2;
  double hue = 0.1;
  double grayscale_p = 0.1;
  double blur_p = 0.3;
  std::int64_t blur_kernel = 9;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  std::array<double, 3> mean = {0.485, 0.456, 0.406};
  std::array<double, 3> std = {0.229, 0.224, 0.225};
  ViewStrategy views = ViewStrategy::kDifferent;

  void validate() const;
};

/// Sampled crop plus the raw (area fraction, aspect) draw that produced it.
struct CropDraw {
  CropRect rect;
  double area = 1.0;
  double aspect = 1.0;
};

/// torchvision-style RandomResizedCrop geometry: up to 10 attempts at a
/// (area, log-aspect) draw that fits, otherwise a centred crop clamped to the
/// aspect range.
CropDraw sample_crop(std::int64_t height, std::int64_t width, const AugmentConfig& cfg, Rng& rng);

/// Crop per `sample_crop`, then bicubic resize to size×size.
Image random_resized_crop(const Image& img, std::int64_t size, const AugmentConfig& cfg, Rng& rng,
                          CropDraw* draw = nullptr);

/// Individual photometric ops. Factors of exactly 1 (hue shift 0) are identities.
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image adjust_hue(const Image& img, double shift);
/// ITU-R 601 luminance (0.299, 0.587, 0.114) copied to all channels.
Image grayscale(const Image& img);
/// k×k normalized Gaussian, reflect-padded borders.
Image gaussian_blur(const Image& img, std::int64_t kernel, double sigma);

/// Random colour jitter: factors uniform in [max(0, 1−s), 1+s], hue in [−h, h],
/// applied in the fixed order brightness, contrast, saturation, hue.
Image color_jitter(const Image& img, const AugmentConfig& cfg, Rng& rng);

/// Jitter / grayscale / blur, each with its probability, in a uniformly
/// shuffled order.
Image color_pipeline(const Image& img, const AugmentConfig& cfg, Rng& rng);

struct ViewPair {
  Image view1, view2;  // normalized
  CropDraw crop;
  bool flipped = false;
};

/// Shared crop and flip, colour per strategy, then normalization of both views.
ViewPair make_views(const Image& img, std::int64_t size, const AugmentConfig& cfg, Rng& rng);

/// (x − mean) / std per channel, and its inverse.
Image normalize(const Image& img, const AugmentConfig& cfg);
Image denormalize(const Image& img, const AugmentConfig& cfg);

/// Stack HWC images of equal size into a [B × H × W × 3] tensor.
template <Real T>
Tensor<T> batch_tensor(std::span<const Image> images);

}  // namespace scott
