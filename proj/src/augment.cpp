#include "scott/augment.hpp"

#include <algorithm>
#include <cmath>

#include "scott/errors.hpp"

namespace scott {

ViewStrategy parse_view_strategy(const std::string& name) {
  if (name == "none") return ViewStrategy::kNone;
  if (name == "same") return ViewStrategy::kSame;
  if (name == "different") return ViewStrategy::kDifferent;
  throw ConfigError("unknown view strategy '" + name + "'", "views.strategy");
}

std::string to_string(ViewStrategy s) {
  switch (s) {
    case ViewStrategy::kNone:
      return "none";
    case ViewStrategy::kSame:
      return "same";
    default:
      return "different";
  }
}

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* key) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(key) + " must be a probability", key);
  };
  prob(hflip_p, "aug.hflip_p");
  prob(jitter_p, "aug.jitter_p");
  prob(grayscale_p, "aug.grayscale_p");
  prob(blur_p, "aug.blur_p");
  if (!(crop_area_min > 0 && crop_area_min <= crop_area_max && crop_area_max <= 1.0))
    throw ConfigError("crop area range must satisfy 0 < min <= max <= 1", "aug.crop_area_min");
  if (!(aspect_min > 0 && aspect_min <= aspect_max)) throw ConfigError("bad aspect range", "aug.aspect_min");
  if (!(blur_sigma_min > 0 && blur_sigma_min <= blur_sigma_max))
    throw ConfigError("blur sigma range must be positive", "aug.blur_sigma_min");
  if (blur_kernel < 1 || blur_kernel % 2 == 0) throw ConfigError("blur kernel must be odd", "aug.blur_kernel");
  if (brightness < 0 || contrast < 0 || saturation < 0) throw ConfigError("jitter strengths must be >= 0", "aug.brightness");
  if (hue < 0 || hue > 0.5) throw ConfigError("hue jitter must be in [0, 0.5]", "aug.hue");
  for (double s : std)
    if (!(s > 0)) throw ConfigError("normalization std must be positive", "norm.std");
}

CropDraw sample_crop(std::int64_t height, std::int64_t width, const AugmentConfig& cfg, Rng& rng) {
  if (height < 1 || width < 1) throw GeometryError("cannot crop an empty image");
  const double area = static_cast<double>(height * width);
  const double log_lo = std::log(cfg.aspect_min), log_hi = std::log(cfg.aspect_max);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double frac = rng.uniform(cfg.crop_area_min, cfg.crop_area_max);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto w = static_cast<std::int64_t>(std::llround(std::sqrt(frac * area * aspect)));
    const auto h = static_cast<std::int64_t>(std::llround(std::sqrt(frac * area / aspect)));
    if (w >= 1 && h >= 1 && w <= width && h <= height) {
      CropDraw d;
      d.rect = {rng.randint(0, height - h), rng.randint(0, width - w), h, w};
      d.area = frac;
      d.aspect = aspect;
      return d;
    }
  }
  const double ratio = static_cast<double>(width) / static_cast<double>(height);
  std::int64_t w = width, h = height;
  if (ratio < cfg.aspect_min) {
    h = std::max<std::int64_t>(1, std::llround(static_cast<double>(w) / cfg.aspect_min));
  } else if (ratio > cfg.aspect_max) {
    w = std::max<std::int64_t>(1, std::llround(static_cast<double>(h) * cfg.aspect_max));
  }
  h = std::min(h, height);
  w = std::min(w, width);
  CropDraw d;
  d.rect = {(height - h) / 2, (width - w) / 2, h, w};
  d.area = static_cast<double>(h * w) / area;
  d.aspect = static_cast<double>(w) / static_cast<double>(h);
  return d;
}

Image random_resized_crop(const Image& img, std::int64_t size, const AugmentConfig& cfg, Rng& rng, CropDraw* draw) {
  const auto d = sample_crop(img.height, img.width, cfg, rng);
  if (draw) *draw = d;
  return resize_bicubic(crop(img, d.rect), size, size);
}

namespace {

float luminance(const float* p) { return 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]; }

float blend(float a, float b, float t) { return std::clamp(b + t * (a - b), 0.f, 1.f); }

void rgb_to_hsv(const float* p, float& h, float& s, float& v) {
  const float mx = std::max({p[0], p[1], p[2]});
  const float mn = std::min({p[0], p[1], p[2]});
  const float delta = mx - mn;
  v = mx;
  s = mx > 0.f ? delta / mx : 0.f;
  if (delta <= 0.f) {
    h = 0.f;
    return;
  }
  float hh;
  if (mx == p[0]) {
    hh = (p[1] - p[2]) / delta;
  } else if (mx == p[1]) {
    hh = 2.f + (p[2] - p[0]) / delta;
  } else {
    hh = 4.f + (p[0] - p[1]) / delta;
  }
  hh /= 6.f;
  if (hh < 0.f) hh += 1.f;
  h = hh;
}

void hsv_to_rgb(float h, float s, float v, float* p) {
  const float hh = h * 6.f;
  const int i = static_cast<int>(std::floor(hh)) % 6;
  const float f = hh - std::floor(hh);
  const float a = v * (1.f - s), b = v * (1.f - s * f), c = v * (1.f - s * (1.f - f));
  switch (i) {
    case 0: p[0] = v, p[1] = c, p[2] = a; break;
    case 1: p[0] = b, p[1] = v, p[2] = a; break;
    case 2: p[0] = a, p[1] = v, p[2] = c; break;
    case 3: p[0] = a, p[1] = b, p[2] = v; break;
    case 4: p[0] = c, p[1] = a, p[2] = v; break;
    default: p[0] = v, p[1] = a, p[2] = b; break;
  }
}

double jitter_factor(double strength, Rng& rng) { return rng.uniform(std::max(0.0, 1.0 - strength), 1.0 + strength); }

}  // namespace

Image adjust_brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  Image out = img;
  for (auto& v : out.pixels) v = std::clamp(v * static_cast<float>(factor), 0.f, 1.f);
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  if (factor == 1.0) return img;
  double m = 0.0;
  const auto n = img.height * img.width;
  for (std::int64_t i = 0; i < n; ++i) m += luminance(img.pixels.data() + i * 3);
  const auto mean = static_cast<float>(m / static_cast<double>(std::max<std::int64_t>(n, 1)));
  Image out = img;
  for (auto& v : out.pixels) v = blend(v, mean, static_cast<float>(factor));
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  if (factor == 1.0) return img;
  Image out = img;
  const auto n = img.height * img.width;
  for (std::int64_t i = 0; i < n; ++i) {
    float* p = out.pixels.data() + i * 3;
    const float g = luminance(p);
    for (int c = 0; c < 3; ++c) p[c] = blend(p[c], g, static_cast<float>(factor));
  }
  return out;
}

Image adjust_hue(const Image& img, double shift) {
  if (shift == 0.0) return img;
  Image out = img;
  const auto n = img.height * img.width;
  for (std::int64_t i = 0; i < n; ++i) {
    float* p = out.pixels.data() + i * 3;
    float h, s, v;
    rgb_to_hsv(p, h, s, v);
    h += static_cast<float>(shift);
    h -= std::floor(h);
    hsv_to_rgb(h, s, v, p);
  }
  return out;
}

Image grayscale(const Image& img) {
  Image out = img;
  const auto n = img.height * img.width;
  for (std::int64_t i = 0; i < n; ++i) {
    float* p = out.pixels.data() + i * 3;
    const float g = std::clamp(luminance(p), 0.f, 1.f);
    p[0] = p[1] = p[2] = g;
  }
  return out;
}

Image gaussian_blur(const Image& img, std::int64_t kernel, double sigma) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("blur kernel must be odd", "aug.blur_kernel");
  const auto r = kernel / 2;
  std::vector<double> k(static_cast<std::size_t>(kernel));
  double total = 0.0;
  for (std::int64_t i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : k) v /= total;
  auto reflect = [](std::int64_t i, std::int64_t n) {
    if (n == 1) return std::int64_t{0};
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  const auto H = img.height, W = img.width;
  std::vector<double> tmp(img.pixels.size());
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::int64_t i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * img.at(y, reflect(x + i, W), c);
        tmp[static_cast<std::size_t>((y * W + x) * 3 + c)] = s;
      }
  Image out(H, W);
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::int64_t i = -r; i <= r; ++i)
          s += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>((reflect(y + i, H) * W + x) * 3 + c)];
        out.at(y, x, c) = std::clamp(static_cast<float>(s), 0.f, 1.f);
      }
  return out;
}

Image color_jitter(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  const double b = jitter_factor(cfg.brightness, rng);
  const double c = jitter_factor(cfg.contrast, rng);
  const double s = jitter_factor(cfg.saturation, rng);
  const double h = rng.uniform(-cfg.hue, cfg.hue);
  return adjust_hue(adjust_saturation(adjust_contrast(adjust_brightness(img, b), c), s), h);
}

Image color_pipeline(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  std::array<int, 3> order = {0, 1, 2};
  for (int i = 2; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.randint(0, i))]);
  Image out = img;
  for (int op : order) {
    if (op == 0) {
      if (rng.bernoulli(cfg.jitter_p)) out = color_jitter(out, cfg, rng);
    } else if (op == 1) {
      if (rng.bernoulli(cfg.grayscale_p)) out = grayscale(out);
    } else {
      if (rng.bernoulli(cfg.blur_p)) out = gaussian_blur(out, cfg.blur_kernel, rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
    }
  }
  return out;
}

Image normalize(const Image& img, const AugmentConfig& cfg) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const auto c = i % 3;
    out.pixels[i] = static_cast<float>((out.pixels[i] - cfg.mean[c]) / cfg.std[c]);
  }
  return out;
}

Image denormalize(const Image& img, const AugmentConfig& cfg) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const auto c = i % 3;
    out.pixels[i] = static_cast<float>(out.pixels[i] * cfg.std[c] + cfg.mean[c]);
  }
  return out;
}

ViewPair make_views(const Image& img, std::int64_t size, const AugmentConfig& cfg, Rng& rng) {
  ViewPair vp;
  Image base = random_resized_crop(img, size, cfg, rng, &vp.crop);
  vp.flipped = rng.bernoulli(cfg.hflip_p);
  if (vp.flipped) base = hflip(base);
  switch (cfg.views) {
    case ViewStrategy::kNone:
      vp.view1 = normalize(base, cfg);
      vp.view2 = vp.view1;
      break;
    case ViewStrategy::kSame:
      vp.view1 = normalize(color_pipeline(base, cfg, rng), cfg);
      vp.view2 = vp.view1;
      break;
    case ViewStrategy::kDifferent:
      vp.view1 = normalize(color_pipeline(base, cfg, rng), cfg);
      vp.view2 = normalize(color_pipeline(base, cfg, rng), cfg);
      break;
  }
  return vp;
}

template <Real T>
Tensor<T> batch_tensor(std::span<const Image> images) {
  if (images.empty()) throw DimensionError("cannot batch zero images");
  const auto H = images[0].height, W = images[0].width;
  std::vector<T> buf;
  buf.reserve(images.size() * static_cast<std::size_t>(H * W * 3));
  for (const auto& im : images) {
    if (im.height != H || im.width != W) throw DimensionError("batched images must share one size");
    buf.insert(buf.end(), im.pixels.begin(), im.pixels.end());
  }
  return Tensor<T>({static_cast<std::int64_t>(images.size()), H, W, 3}, std::move(buf));
}

template Tensor<float> batch_tensor(std::span<const Image>);
template Tensor<double> batch_tensor(std::span<const Image>);

}  // namespace scott
