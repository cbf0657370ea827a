#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scott/image.hpp"

namespace scott {

struct ImageSample {
  Image image;
  std::int64_t label = -1;
  /// Per-pixel ground-truth foreground flags (synthetic data only; else empty).
  std::vector<std::uint8_t> foreground;
  std::string name;
};

struct Dataset {
  std::vector<ImageSample> samples;
  std::vector<std::string> class_names;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::int64_t num_classes() const { return static_cast<std::int64_t>(class_names.size()); }
};

struct SynthSpec {
  std::int64_t n = 0;
  std::int64_t classes = 0;
  std::int64_t size = 0;
};

/// Parse "synth:<n>x<classes>x<size>"; returns false if `spec` has no synth: prefix.
bool parse_synth_spec(const std::string& spec, SynthSpec& out);

/// Class-coded synthetic images: one disk, square or triangle per image whose
/// hue encodes the class, covering 20–50% of the area, on a low-saturation
/// striped and noisy background. Deterministic in `seed`.
Dataset synth_dataset(std::int64_t n, std::int64_t classes, std::int64_t size, std::uint64_t seed);

/// root/<class_name>/<image files>; classes and files in sorted order.
/// PNG and binary PPM files are read, other files are skipped.
Dataset load_image_folder(const std::filesystem::path& root);

/// Flat directory of images (no labels), sorted by file name.
Dataset load_image_list(const std::filesystem::path& dir);

/// "synth:..." or a class-folder root. Missing or empty data → DataError.
Dataset load_dataset(const std::string& spec, std::uint64_t seed);

/// The first ceil(fraction·n) samples of a seeded permutation (fraction in (0, 1]).
Dataset take_fraction(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace scott
