#include <doctest.h>

#include <algorithm>
#include <set>

#include "scott/masking.hpp"

using namespace scott;

TEST_CASE("masked count is floor(ratio * N)") {
  CHECK(masked_count(196, 0.6) == 117);
  CHECK(masked_count(100, 0.29) == 29);
  CHECK(masked_count(16, 0.0) == 0);
  CHECK(masked_count(16, 1.0) == 16);
}

TEST_CASE("blockwise and random masks hit the exact count") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const double ratio = rng.uniform(0.05, 0.95);
    const auto gh = rng.randint(4, 14), gw = rng.randint(4, 14);
    auto b = blockwise_mask(gh, gw, ratio, rng, {4, 0.3});
    auto r = random_mask(gh, gw, ratio, rng);
    CHECK(static_cast<std::int64_t>(b.masked.size()) == masked_count(gh * gw, ratio));
    CHECK(static_cast<std::int64_t>(r.masked.size()) == masked_count(gh * gw, ratio));
    CHECK(std::is_sorted(b.masked.begin(), b.masked.end()));
    CHECK(std::set<std::int64_t>(b.masked.begin(), b.masked.end()).size() == b.masked.size());
  }
}

TEST_CASE("context is the complement of the mask") {
  Rng rng(5);
  auto m = blockwise_mask(14, 14, 0.6, rng);
  auto ctx = m.context();
  CHECK(ctx.size() + m.masked.size() == 196);
  for (auto i : ctx) CHECK_FALSE(m.is_masked(i));
  auto vis = m.visibility();
  for (std::int64_t i = 0; i < 196; ++i) CHECK((vis[static_cast<std::size_t>(i)] == 0) == m.is_masked(i));
}

TEST_CASE("blockwise draws are built from admissible rectangles") {
  Rng rng(9);
  BlockwiseParams p{16, 0.3};
  for (int i = 0; i < 50; ++i) {
    BlockwiseTrace trace;
    auto m = blockwise_mask(14, 14, 0.6, rng, p, &trace);
    CHECK_FALSE(trace.fell_back_to_random);
    for (const auto& b : trace.blocks) {
      CHECK(b.height * b.width >= p.min_block);
      const double aspect = static_cast<double>(b.height) / static_cast<double>(b.width);
      CHECK(aspect >= p.min_aspect - 1e-9);
      CHECK(aspect <= 1.0 / p.min_aspect + 1e-9);
    }
    for (auto idx : m.masked) {
      bool covered = false;
      for (const auto& b : trace.blocks) covered = covered || b.contains(idx / 14, idx % 14);
      CHECK(covered);
    }
  }
}

TEST_CASE("blockwise falls back to random when no rectangle fits") {
  Rng rng(1);
  BlockwiseTrace trace;
  auto m = blockwise_mask(2, 2, 0.5, rng, {16, 0.3}, &trace);
  CHECK(trace.fell_back_to_random);
  CHECK(m.masked.size() == 2);
}

TEST_CASE("blockwise masks are more contiguous than random ones") {
  double blk = 0, rnd = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng a(seed), b(seed);
    blk += mask_contiguity(blockwise_mask(14, 14, 0.6, a));
    rnd += mask_contiguity(random_mask(14, 14, 0.6, b));
  }
  CHECK(blk > rnd);
}

TEST_CASE("mask validation") {
  CHECK_THROWS(MaskSet::from_indices(2, 2, {4}));
  CHECK(MaskSet::from_indices(2, 2, {3, 1, 3}).masked == std::vector<std::int64_t>{1, 3});
  Rng rng(0);
  CHECK_THROWS(random_mask(4, 4, 1.5, rng));
  CHECK_THROWS_AS(parse_mask_strategy("stripes"), ConfigError);
}
