#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace scott {

/// RGB image, row-major HWC floats in [0, 1].
struct Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::int64_t h, std::int64_t w, float fill = 0.f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h * w * 3), fill) {}

  float& at(std::int64_t y, std::int64_t x, std::int64_t c) { return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  float at(std::int64_t y, std::int64_t x, std::int64_t c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  bool empty() const { return pixels.empty(); }
  bool operator==(const Image&) const = default;
};

/// Read an 8-bit RGB PNG or binary PPM (P6). Throws DataError on anything else.
Image load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& img);
void save_ppm(const std::filesystem::path& path, const Image& img);
/// Quantize to 8 bits per channel (round half up, clamped).
std::vector<std::uint8_t> to_rgb8(const Image& img);

/// Rectangle in pixel coordinates.
struct CropRect {
  std::int64_t top = 0, left = 0, height = 0, width = 0;
  bool operator==(const CropRect&) const = default;
};

Image crop(const Image& img, const CropRect& r);
Image hflip(const Image& img);
/// Separable bicubic (a = −0.5) resampling; the filter support widens when
/// downscaling so that minification is anti-aliased.
Image resize_bicubic(const Image& img, std::int64_t out_h, std::int64_t out_w);
/// Resize the shorter side so that size/crop keeps the 256:224 ratio, then
/// take the central crop×crop window.
Image resize_center_crop(const Image& img, std::int64_t crop_size);

}  // namespace scott
