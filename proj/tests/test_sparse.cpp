#include <doctest.h>

#include "oracles.hpp"
#include "scott/sparse.hpp"
#include "scott/tokenizer.hpp"
#include "support.hpp"

using namespace scott;
using test::Dense;

namespace {

Dense to_dense(const Tensor<double>& t) {
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), std::vector<double>(t.data().begin(), t.data().end())};
}

double max_abs_diff(const Tensor<double>& a, const Dense& b) {
  REQUIRE(a.numel() == static_cast<std::int64_t>(b.v.size()));
  double m = 0;
  for (std::size_t i = 0; i < b.v.size(); ++i) m = std::max(m, std::abs(a[i] - b.v[i]));
  return m;
}

}  // namespace

TEST_CASE("fully active sparse ops equal dense references") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    const auto B = rng.randint(1, 2), H = rng.randint(5, 12), W = rng.randint(5, 12);
    const auto cin = rng.randint(1, 4), cout = rng.randint(1, 5);
    const auto K = 2 * rng.randint(0, 3) + 1, stride = rng.randint(1, 2), pad = K / 2;
    auto x = test::randn<double>({B, H, W, cin}, rng);
    auto w = test::randn<double>({cout, cin, K, K}, rng);
    auto b = test::randn<double>({cout}, rng);
    const auto xd = to_dense(x);
    auto y = sparse_conv2d(dense_map(x), w, b, stride, pad);
    CHECK(y.active.count_active() == static_cast<std::int64_t>(y.active.cells.size()));
    CHECK(max_abs_diff(y.features, test::dense_conv(xd, {w.data().begin(), w.data().end()},
                                                    {b.data().begin(), b.data().end()}, cout, K, stride, pad)) < 1e-6);
    CHECK(max_abs_diff(sparse_relu(dense_map(x)).features, test::dense_relu(xd)) < 1e-6);
    CHECK(max_abs_diff(sparse_max_blur_pool(dense_map(x)).features, test::dense_max_blur_pool(xd)) < 1e-6);
  }
}

TEST_CASE("kernel-centre activity rule") {
  auto a = ActivityMap::full(1, 4, 4);
  a.cells[5] = 0;  // (1, 1)
  auto o = propagate_activity(a, 3, 2, 1);
  CHECK(o.height == 2);
  CHECK(o.width == 2);
  // output (i, j) reads centre (2i, 2j)
  CHECK(o.at(0, 0, 0) == 1);
  a.cells[0] = 0;
  CHECK(propagate_activity(a, 3, 2, 1).at(0, 0, 0) == 0);
}

TEST_CASE("inactive inputs neither contribute nor receive gradient") {
  Rng rng(7);
  auto x = test::leaf<double>({1, 8, 8, 2}, rng);
  auto mask = MaskSet::from_indices(2, 2, {1, 2});
  std::vector<MaskSet> masks{mask};
  auto w = test::leaf<double>({3, 2, 3, 3}, rng);
  auto b = test::leaf<double>({3}, rng);
  Tape<double> tape;
  auto holes = mask_to_pixel_holes(x, std::span<const MaskSet>(masks), 4);
  auto y = sparse_conv2d(holes, w, b, 1, 1);
  auto loss = ops::sum(ops::mul(y.features, test::randn<double>(y.features.shape(), rng)));
  tape.backward(loss);
  for (std::int64_t yy = 0; yy < 8; ++yy)
    for (std::int64_t xx = 0; xx < 8; ++xx) {
      const bool masked = mask.is_masked((yy / 4) * 2 + xx / 4);
      for (int c = 0; c < 2; ++c) {
        const auto i = static_cast<std::size_t>((yy * 8 + xx) * 2 + c);
        if (masked) {
          CHECK(x.grad_data()[i] == 0.0);
          CHECK(holes.features[i] == 0.0);
        }
      }
    }
}

TEST_CASE("sparse op gradients under partial activity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    auto x = test::leaf<double>({2, 8, 8, 2}, rng);
    auto w = test::leaf<double>({3, 2, 3, 3}, rng);
    auto b = test::leaf<double>({3}, rng);
    std::vector<MaskSet> masks{random_mask(4, 4, 0.4, rng), random_mask(4, 4, 0.25, rng)};
    auto r1 = test::randn<double>({2, 4, 4, 3}, rng);
    auto r2 = test::randn<double>({2, 4, 4, 2}, rng);
    CHECK(test::grad_check({x, w, b}, [&] {
            auto h = mask_to_pixel_holes(x, std::span<const MaskSet>(masks), 2);
            return ops::sum(ops::mul(sparse_relu(sparse_conv2d(h, w, b, 2, 1)).features, r1));
          }).ok());
    CHECK(test::grad_check({x}, [&] {
            auto h = mask_to_pixel_holes(x, std::span<const MaskSet>(masks), 2);
            return ops::sum(ops::mul(sparse_max_blur_pool(h).features, r2));
          }).ok());
  }
}

TEST_CASE("stem output activity equals patch visibility") {
  Rng rng(11);
  StemConfig sc;
  sc.hidden = 4;
  sc.dim = 8;
  ScottStem<float> stem(sc, rng);
  auto img = test::randn<float>({1, 64, 64, 3}, rng);
  for (int i = 0; i < 20; ++i) {
    std::vector<MaskSet> m{blockwise_mask(4, 4, 0.5, rng, {2, 0.3})};
    auto grid = stem.tokenize(mask_to_pixel_holes(img, std::span<const MaskSet>(m), 16));
    CHECK(grid.active == m[0].visibility());
  }
}

TEST_CASE("tokenizer rejects sizes that do not tile") {
  Rng rng(1);
  Tokenizer<float> tok(TokenizerKind::kScott, StemConfig{}, rng);
  Tensor<float> img({1, 40, 48, 3});
  CHECK_THROWS_AS(tok(img, {}), GeometryError);
  CHECK_THROWS_AS(patchify(img, 16), GeometryError);
}

TEST_CASE("patch-embed tokenizer carries mask visibility as activity") {
  Rng rng(2);
  StemConfig sc;
  sc.dim = 8;
  Tokenizer<double> tok(TokenizerKind::kPatchEmbed, sc, rng);
  auto img = test::randn<double>({1, 32, 32, 3}, rng);
  std::vector<MaskSet> m{MaskSet::from_indices(2, 2, {3})};
  auto g = tok(img, m);
  CHECK(g.tokens.shape() == Shape{1, 4, 8});
  CHECK(g.active == std::vector<std::uint8_t>{1, 1, 1, 0});
}
