#include "scott/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>

#include "scott/errors.hpp"
#include "scott/rng.hpp"

namespace scott {

namespace {

void hsv(double h, double s, double v, float* out) {
  h -= std::floor(h);
  const double hh = h * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double a = v * (1 - s), b = v * (1 - s * f), c = v * (1 - s * (1 - f));
  double r, g, bl;
  switch (i) {
    case 0: r = v, g = c, bl = a; break;
    case 1: r = b, g = v, bl = a; break;
    case 2: r = a, g = v, bl = c; break;
    case 3: r = a, g = b, bl = v; break;
    case 4: r = c, g = a, bl = v; break;
    default: r = v, g = a, bl = b; break;
  }
  out[0] = static_cast<float>(r);
  out[1] = static_cast<float>(g);
  out[2] = static_cast<float>(bl);
}

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm";
}

}  // namespace

bool parse_synth_spec(const std::string& spec, SynthSpec& out) {
  if (spec.rfind("synth:", 0) != 0) return false;
  static const std::regex re(R"(synth:(\d+)x(\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(spec, m, re)) throw DataError("malformed synthetic dataset spec '" + spec + "'");
  out.n = std::stoll(m[1]);
  out.classes = std::stoll(m[2]);
  out.size = std::stoll(m[3]);
  return true;
}

Dataset synth_dataset(std::int64_t n, std::int64_t classes, std::int64_t size, std::uint64_t seed) {
  if (n < 0 || classes < 1) throw DataError("synthetic dataset needs n >= 0 and classes >= 1");
  if (size < 16 || size % 16 != 0) throw GeometryError("synthetic image size must be a positive multiple of 16");
  Dataset ds;
  for (std::int64_t k = 0; k < classes; ++k) ds.class_names.push_back("class" + std::to_string(k));
  ds.samples.reserve(static_cast<std::size_t>(n));
  const double S = static_cast<double>(size);
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, {0x5947ull, static_cast<std::uint64_t>(i)});
    ImageSample s;
    s.label = i % classes;
    s.name = "synth_" + std::to_string(i);
    s.image = Image(size, size);
    s.foreground.assign(static_cast<std::size_t>(size * size), 0);

    // background: low-saturation stripes plus per-pixel noise
    const double bg_hue = rng.uniform();
    const double bg_sat = rng.uniform(0.0, 0.2);
    const double bg_val = rng.uniform(0.35, 0.65);
    const double freq = rng.uniform(2.0, 6.0) * 2.0 * std::numbers::pi / S;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::int64_t y = 0; y < size; ++y)
      for (std::int64_t x = 0; x < size; ++x) {
        const double t = std::sin(freq * (ca * x + sa * y) + phase);
        const double v = std::clamp(bg_val + 0.12 * t + 0.05 * (rng.uniform() - 0.5), 0.0, 1.0);
        hsv(bg_hue, bg_sat, v, &s.image.at(y, x, 0));
      }

    // foreground shape
    const int shape = static_cast<int>(rng.randint(0, 2));
    const double area = rng.uniform(0.22, 0.48) * S * S;
    double half_w, half_h;
    if (shape == 0) {
      half_w = half_h = std::sqrt(area / std::numbers::pi);
    } else if (shape == 1) {
      half_w = half_h = 0.5 * std::sqrt(area);
    } else {
      half_w = half_h = 0.5 * std::sqrt(2.0 * area);
    }
    const double cx = rng.uniform(half_w, S - half_w);
    const double cy = rng.uniform(half_h, S - half_h);
    const double hue = (static_cast<double>(s.label) + rng.uniform(-0.1, 0.1)) / static_cast<double>(classes);
    const double sat = rng.uniform(0.7, 1.0);
    const double val = rng.uniform(0.75, 1.0);
    for (std::int64_t y = 0; y < size; ++y)
      for (std::int64_t x = 0; x < size; ++x) {
        const double px = x + 0.5 - cx, py = y + 0.5 - cy;
        bool inside;
        if (shape == 0) {
          inside = px * px + py * py <= half_w * half_w;
        } else if (shape == 1) {
          inside = std::abs(px) <= half_w && std::abs(py) <= half_h;
        } else {
          // apex at the top centre, base at the bottom
          const double u = (py + half_h) / (2.0 * half_h);
          inside = u >= 0.0 && u <= 1.0 && std::abs(px) <= u * half_w;
        }
        if (!inside) continue;
        s.foreground[static_cast<std::size_t>(y * size + x)] = 1;
        const double shade = std::clamp(val * (0.9 + 0.1 * (1.0 - py / (2.0 * half_h))) + 0.03 * (rng.uniform() - 0.5), 0.0, 1.0);
        hsv(hue, sat, shade, &s.image.at(y, x, 0));
      }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_image_folder(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError("dataset directory '" + root.string() + "' does not exist");
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) classes.push_back(e.path());
  std::sort(classes.begin(), classes.end());
  Dataset ds;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    ds.class_names.push_back(classes[k].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(classes[k]))
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ImageSample s;
      s.image = load_image(f);
      s.label = static_cast<std::int64_t>(k);
      s.name = classes[k].filename().string() + "/" + f.filename().string();
      ds.samples.push_back(std::move(s));
    }
  }
  if (ds.empty()) throw DataError("no PNG/PPM images found under '" + root.string() + "'");
  return ds;
}

Dataset load_image_list(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("image directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Dataset ds;
  for (const auto& f : files) {
    ImageSample s;
    s.image = load_image(f);
    s.name = f.filename().string();
    ds.samples.push_back(std::move(s));
  }
  if (ds.empty()) throw DataError("no PNG/PPM images found in '" + dir.string() + "'");
  return ds;
}

Dataset load_dataset(const std::string& spec, std::uint64_t seed) {
  SynthSpec ss;
  if (parse_synth_spec(spec, ss)) {
    if (ss.n == 0) throw DataError("synthetic dataset is empty");
    return synth_dataset(ss.n, ss.classes, ss.size, seed);
  }
  return load_image_folder(spec);
}

Dataset take_fraction(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("data fraction must be in (0, 1]", "data.fraction");
  if (fraction == 1.0) return data;
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, {0xf4ac7ull});
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.randint(0, static_cast<std::int64_t>(i) - 1))]);
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size())));
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.class_names = data.class_names;
  for (auto i : idx) out.samples.push_back(data.samples[i]);
  return out;
}

}  // namespace scott
