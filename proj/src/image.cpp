#include "scott/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "scott/errors.hpp"

namespace scott {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::filesystem::path& path) {
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str())) {
    throw DataError("cannot read PNG '" + path.string() + "': " + im.message);
  }
  im.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&im);
    throw DataError("cannot decode PNG '" + path.string() + "': " + im.message);
  }
  Image out(im.height, im.width);
  for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[i] = static_cast<float>(buf[i]) / 255.f;
  return out;
}

std::int64_t read_ppm_int(std::istream& in) {
  std::int64_t v = 0;
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  if (!(in >> v)) throw DataError("malformed PPM header");
  return v;
}

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  char magic[2] = {};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '6') throw DataError("'" + path.string() + "' is not a binary PPM (P6)");
  const auto w = read_ppm_int(in), h = read_ppm_int(in), maxval = read_ppm_int(in);
  if (w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PPM geometry or depth in '" + path.string() + "'");
  in.get();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw DataError("truncated PPM '" + path.string() + "'");
  Image out(h, w);
  for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[i] = static_cast<float>(buf[i]) / 255.f;
  return out;
}

double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

struct Taps {
  std::vector<std::int64_t> first;
  std::vector<std::int64_t> count;
  std::vector<double> weights;
  std::int64_t stride = 0;
};

Taps make_taps(std::int64_t in, std::int64_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double fscale = std::max(scale, 1.0);
  const double support = 2.0 * fscale;
  Taps t;
  t.stride = static_cast<std::int64_t>(std::ceil(support)) * 2 + 1;
  t.first.resize(static_cast<std::size_t>(out));
  t.count.resize(static_cast<std::size_t>(out));
  t.weights.assign(static_cast<std::size_t>(out * t.stride), 0.0);
  for (std::int64_t o = 0; o < out; ++o) {
    const double centre = (static_cast<double>(o) + 0.5) * scale;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(centre - support + 0.5));
    const auto hi = std::min<std::int64_t>(in, static_cast<std::int64_t>(centre + support + 0.5));
    double total = 0.0;
    double* w = t.weights.data() + o * t.stride;
    for (std::int64_t i = lo; i < hi; ++i) {
      w[i - lo] = cubic((static_cast<double>(i) - centre + 0.5) / fscale);
      total += w[i - lo];
    }
    if (total != 0.0)
      for (std::int64_t i = 0; i < hi - lo; ++i) w[i] /= total;
    t.first[static_cast<std::size_t>(o)] = lo;
    t.count[static_cast<std::size_t>(o)] = hi - lo;
  }
  return t;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open '" + path.string() + "'");
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  if (png_sig_cmp(sig, 0, 8) == 0) return load_png(path);
  if (sig[0] == 'P' && sig[1] == '6') return load_ppm(path);
  throw DataError("unsupported image format: '" + path.string() + "'");
}

std::vector<std::uint8_t> to_rgb8(const Image& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.f, 1.f);
    out[i] = static_cast<std::uint8_t>(std::floor(v * 255.f + 0.5f));
  }
  return out;
}

void save_png(const std::filesystem::path& path, const Image& img) {
  auto bytes = to_rgb8(img);
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(img.width);
  im.height = static_cast<png_uint_32>(img.height);
  im.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&im, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write PNG '" + path.string() + "': " + im.message);
  }
}

void save_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  auto bytes = to_rgb8(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image crop(const Image& img, const CropRect& r) {
  if (r.top < 0 || r.left < 0 || r.height < 1 || r.width < 1 || r.top + r.height > img.height ||
      r.left + r.width > img.width) {
    throw GeometryError("crop rectangle outside the image");
  }
  Image out(r.height, r.width);
  for (std::int64_t y = 0; y < r.height; ++y) {
    const float* src = img.pixels.data() + ((r.top + y) * img.width + r.left) * 3;
    std::copy(src, src + r.width * 3, out.pixels.data() + y * r.width * 3);
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (std::int64_t y = 0; y < img.height; ++y)
    for (std::int64_t x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
  return out;
}

Image resize_bicubic(const Image& img, std::int64_t out_h, std::int64_t out_w) {
  if (img.empty() || out_h < 1 || out_w < 1) throw GeometryError("resize needs a non-empty source and target");
  if (out_h == img.height && out_w == img.width) return img;
  const Taps th = make_taps(img.height, out_h);
  const Taps tw = make_taps(img.width, out_w);
  std::vector<double> tmp(static_cast<std::size_t>(img.height * out_w * 3));
  for (std::int64_t y = 0; y < img.height; ++y)
    for (std::int64_t x = 0; x < out_w; ++x) {
      const double* w = tw.weights.data() + x * tw.stride;
      const auto lo = tw.first[static_cast<std::size_t>(x)], n = tw.count[static_cast<std::size_t>(x)];
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += w[i] * img.at(y, lo + i, c);
        tmp[static_cast<std::size_t>((y * out_w + x) * 3 + c)] = s;
      }
    }
  Image out(out_h, out_w);
  for (std::int64_t y = 0; y < out_h; ++y) {
    const double* w = th.weights.data() + y * th.stride;
    const auto lo = th.first[static_cast<std::size_t>(y)], n = th.count[static_cast<std::size_t>(y)];
    for (std::int64_t x = 0; x < out_w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += w[i] * tmp[static_cast<std::size_t>(((lo + i) * out_w + x) * 3 + c)];
        out.at(y, x, c) = std::clamp(static_cast<float>(s), 0.f, 1.f);
      }
  }
  return out;
}

Image resize_center_crop(const Image& img, std::int64_t crop_size) {
  const auto resize_to = static_cast<std::int64_t>(std::llround(static_cast<double>(crop_size) * 256.0 / 224.0));
  std::int64_t h, w;
  if (img.height <= img.width) {
    h = resize_to;
    w = std::max<std::int64_t>(resize_to, std::llround(static_cast<double>(img.width) * resize_to / img.height));
  } else {
    w = resize_to;
    h = std::max<std::int64_t>(resize_to, std::llround(static_cast<double>(img.height) * resize_to / img.width));
  }
  auto r = resize_bicubic(img, h, w);
  return crop(r, {(h - crop_size) / 2, (w - crop_size) / 2, crop_size, crop_size});
}

}  // namespace scott
