#include "scott/masking.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "scott/errors.hpp"

namespace scott {

bool MaskSet::is_masked(std::int64_t index) const {
  return std::binary_search(masked.begin(), masked.end(), index);
}

std::vector<std::int64_t> MaskSet::context() const {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(num_patches()) - masked.size());
  auto it = masked.begin();
  for (std::int64_t i = 0; i < num_patches(); ++i) {
    if (it != masked.end() && *it == i) {
      ++it;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::uint8_t> MaskSet::visibility() const {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(num_patches()), 1);
  for (auto i : masked) v[static_cast<std::size_t>(i)] = 0;
  return v;
}

MaskSet MaskSet::none(std::int64_t grid_h, std::int64_t grid_w) {
  MaskSet m;
  m.grid_h = grid_h;
  m.grid_w = grid_w;
  return m;
}

MaskSet MaskSet::from_indices(std::int64_t grid_h, std::int64_t grid_w, std::vector<std::int64_t> indices) {
  MaskSet m = none(grid_h, grid_w);
  for (auto i : indices) {
    if (i < 0 || i >= grid_h * grid_w) throw GeometryError("mask index out of range: " + std::to_string(i));
  }
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  m.masked = std::move(indices);
  m.ratio = m.num_patches() > 0 ? static_cast<double>(m.masked.size()) / static_cast<double>(m.num_patches()) : 0.0;
  return m;
}

MaskStrategy parse_mask_strategy(const std::string& name) {
  if (name == "blockwise") return MaskStrategy::kBlockwise;
  if (name == "random") return MaskStrategy::kRandom;
  throw ConfigError("unknown mask strategy '" + name + "'", "mask.strategy");
}

std::string to_string(MaskStrategy s) {
  return s == MaskStrategy::kBlockwise ? "blockwise" : "random";
}

std::int64_t masked_count(std::int64_t num_patches, double ratio) {
  return static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(num_patches) + 1e-9));
}

namespace {

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("mask ratio must lie in (0, 1), got " + std::to_string(ratio), "mask.ratio");
  }
}

bool admissible(std::int64_t h, std::int64_t w, std::int64_t gh, std::int64_t gw, const BlockwiseParams& p) {
  if (h < 1 || w < 1 || h > gh || w > gw || h * w < p.min_block) return false;
  const double aspect = static_cast<double>(h) / static_cast<double>(w);
  return aspect >= p.min_aspect - 1e-12 && aspect <= 1.0 / p.min_aspect + 1e-12;
}

bool any_admissible(std::int64_t gh, std::int64_t gw, const BlockwiseParams& p) {
  for (std::int64_t h = 1; h <= gh; ++h)
    for (std::int64_t w = 1; w <= gw; ++w)
      if (admissible(h, w, gh, gw, p)) return true;
  return false;
}

}  // namespace

MaskSet random_mask(std::int64_t grid_h, std::int64_t grid_w, double ratio, Rng& rng) {
  check_ratio(ratio);
  if (grid_h < 1 || grid_w < 1) throw GeometryError("empty patch grid");
  const std::int64_t n = grid_h * grid_w;
  const std::int64_t k = masked_count(n, ratio);
  std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates: the first k slots are the sample.
  for (std::int64_t i = 0; i < k; ++i) {
    const auto j = rng.randint(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  MaskSet m = MaskSet::from_indices(grid_h, grid_w, std::move(pool));
  m.ratio = ratio;
  return m;
}

MaskSet blockwise_mask(std::int64_t grid_h, std::int64_t grid_w, double ratio, Rng& rng,
                       const BlockwiseParams& params, BlockwiseTrace* trace) {
  check_ratio(ratio);
  if (grid_h < 1 || grid_w < 1) throw GeometryError("empty patch grid");
  if (params.min_block < 1 || !(params.min_aspect > 0.0 && params.min_aspect <= 1.0)) {
    throw ConfigError("invalid blockwise masking parameters", "mask.min_block");
  }
  if (trace) *trace = {};
  const std::int64_t n = grid_h * grid_w;
  const std::int64_t target = masked_count(n, ratio);

  if (!any_admissible(grid_h, grid_w, params)) {
    std::cerr << "warning: no " << params.min_block << "-patch block fits a " << grid_h << "x" << grid_w
              << " grid; using random masking\n";
    if (trace) trace->fell_back_to_random = true;
    return random_mask(grid_h, grid_w, ratio, rng);
  }

  std::vector<std::uint8_t> cell(static_cast<std::size_t>(n), 0);
  std::int64_t count = 0;
  const double log_lo = std::log(params.min_aspect);
  const double log_hi = -log_lo;
  constexpr int kMaxDraws = 100000;

  for (int draw = 0; draw < kMaxDraws && count < target; ++draw) {
    const double max_area = std::max<double>(static_cast<double>(params.min_block), static_cast<double>(target - count));
    const double area = rng.uniform(static_cast<double>(params.min_block), max_area);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto h = static_cast<std::int64_t>(std::llround(std::sqrt(area * aspect)));
    const auto w = static_cast<std::int64_t>(std::llround(std::sqrt(area / aspect)));
    if (!admissible(h, w, grid_h, grid_w, params)) continue;
    const BlockRect rect{rng.randint(0, grid_h - h), rng.randint(0, grid_w - w), h, w};

    std::vector<std::int64_t> fresh;
    for (std::int64_t r = rect.top; r < rect.top + h; ++r)
      for (std::int64_t c = rect.left; c < rect.left + w; ++c)
        if (!cell[static_cast<std::size_t>(r * grid_w + c)]) fresh.push_back(r * grid_w + c);

    const auto excess = count + static_cast<std::int64_t>(fresh.size()) - target;
    if (excess > 0) {
      const double cr = static_cast<double>(rect.top) + static_cast<double>(h - 1) / 2.0;
      const double cc = static_cast<double>(rect.left) + static_cast<double>(w - 1) / 2.0;
      auto dist = [&](std::int64_t idx) {
        const double dr = static_cast<double>(idx / grid_w) - cr;
        const double dc = static_cast<double>(idx % grid_w) - cc;
        return dr * dr + dc * dc;
      };
      std::stable_sort(fresh.begin(), fresh.end(), [&](std::int64_t a, std::int64_t b) {
        const double da = dist(a), db = dist(b);
        return da != db ? da > db : a > b;
      });
      fresh.erase(fresh.begin(), fresh.begin() + excess);
    }
    for (auto idx : fresh) cell[static_cast<std::size_t>(idx)] = 1;
    count += static_cast<std::int64_t>(fresh.size());
    if (trace) trace->blocks.push_back(rect);
  }
  if (count != target) {
    throw StateError("blockwise masking failed to reach the target count");
  }

  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(target));
  for (std::int64_t i = 0; i < n; ++i)
    if (cell[static_cast<std::size_t>(i)]) idx.push_back(i);
  MaskSet m = MaskSet::from_indices(grid_h, grid_w, std::move(idx));
  m.ratio = ratio;
  return m;
}

MaskSet draw_mask(MaskStrategy strategy, std::int64_t grid_h, std::int64_t grid_w, double ratio, Rng& rng,
                  const BlockwiseParams& params) {
  return strategy == MaskStrategy::kBlockwise ? blockwise_mask(grid_h, grid_w, ratio, rng, params)
                                              : random_mask(grid_h, grid_w, ratio, rng);
}

double mask_contiguity(const MaskSet& mask) {
  if (mask.masked.empty()) return 0.0;
  const auto vis = mask.visibility();
  auto masked_at = [&](std::int64_t r, std::int64_t c) {
    return r >= 0 && r < mask.grid_h && c >= 0 && c < mask.grid_w &&
           vis[static_cast<std::size_t>(r * mask.grid_w + c)] == 0;
  };
  std::int64_t total = 0;
  for (auto idx : mask.masked) {
    const auto r = idx / mask.grid_w, c = idx % mask.grid_w;
    total += masked_at(r - 1, c) + masked_at(r + 1, c) + masked_at(r, c - 1) + masked_at(r, c + 1);
  }
  return static_cast<double>(total) / static_cast<double>(mask.masked.size());
}

}  // namespace scott
