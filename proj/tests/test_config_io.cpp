#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scott/augment.hpp"
#include "scott/checkpoint.hpp"
#include "scott/config.hpp"
#include "scott/dataset.hpp"

using namespace scott;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("scott_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config text round-trips and digests ignore key order") {
  auto cfg = TrainConfig::desk();
  auto back = parse_config_text(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
  CHECK(parse_config_text("seed=3\nbatch=8\n").digest() == parse_config_text("batch=8\n# note\nseed=3\n").digest());
  CHECK(parse_config_text("seed=3").digest() != parse_config_text("seed=4").digest());
}

TEST_CASE("unknown or malformed keys name the key") {
  try {
    parse_config_text("model.depth=3");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "model.depth");
  }
  try {
    parse_config_text("mask.ratio=abc");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "mask.ratio");
  }
  CHECK_THROWS_AS(parse_config_text("model.dim=190\nmodel.heads=3"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("no equals sign"), ConfigError);
}

TEST_CASE("every listed key can be read back") {
  TrainConfig cfg;
  for (const auto& k : config_keys()) {
    auto v = get_config_value(cfg, k);
    TrainConfig copy = cfg;
    set_config_value(copy, k, v);
    CHECK(get_config_value(copy, k) == v);
  }
}

TEST_CASE("checkpoint round trip and corruption detection") {
  auto dir = scratch("ckpt");
  Checkpoint c;
  c.config_text = TrainConfig::desk().to_text();
  c.meta["step"] = "12";
  c.tensors.emplace_back("a.w", Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}));
  c.tensors.emplace_back("b", Tensor<float>({}, std::vector<float>{7}));
  write_checkpoint(dir / "x.ckpt", c);
  auto r = read_checkpoint(dir / "x.ckpt");
  CHECK(r.config_text == c.config_text);
  CHECK(r.meta_value("step") == "12");
  CHECK(r.tensor("a.w").shape() == Shape{2, 3});
  CHECK(r.tensor("a.w")[5] == 6.f);
  CHECK(r.group("a.").size() == 1);
  CHECK_THROWS_AS(r.tensor("missing"), CheckpointError);

  std::string bytes;
  {
    std::ifstream in(dir / "x.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x10;
    std::ofstream(dir / "flip.ckpt", std::ios::binary) << flipped;
    CHECK_THROWS_AS(read_checkpoint(dir / "flip.ckpt"), CheckpointError);
  }
  std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 20);
  CHECK_THROWS_AS(read_checkpoint(dir / "trunc.ckpt"), CheckpointError);
  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "not a checkpoint at all";
  CHECK_THROWS_AS(read_checkpoint(dir / "junk.ckpt"), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint(dir / "absent.ckpt"), CheckpointError);
}

TEST_CASE("synthetic dataset is deterministic and class-balanced") {
  auto a = synth_dataset(16, 4, 32, 1), b = synth_dataset(16, 4, 32, 1), c = synth_dataset(16, 4, 32, 2);
  CHECK(a.size() == 16);
  CHECK(a.num_classes() == 4);
  CHECK(a.samples[3].image == b.samples[3].image);
  CHECK_FALSE(a.samples[3].image == c.samples[3].image);
  for (const auto& s : a.samples) {
    CHECK(s.foreground.size() == 32 * 32);
    std::int64_t fg = 0;
    for (auto f : s.foreground) fg += f;
    CHECK(fg > 0.15 * 1024);
    CHECK(fg < 0.55 * 1024);
  }
  SynthSpec spec;
  CHECK(parse_synth_spec("synth:512x4x64", spec));
  CHECK(spec.n == 512);
  CHECK_FALSE(parse_synth_spec("/data/flowers", spec));
  CHECK_THROWS_AS(load_dataset("/definitely/not/here", 0), DataError);
  CHECK(take_fraction(a, 0.25, 0).size() == 4);
}

TEST_CASE("image folders load in sorted class order") {
  auto dir = scratch("folder");
  auto data = synth_dataset(4, 2, 16, 0);
  for (const auto& s : data.samples) {
    auto cls = dir / (s.label == 0 ? "b_class" : "a_class");
    fs::create_directories(cls);
    save_png(cls / (s.name + ".png"), s.image);
  }
  std::ofstream(dir / "a_class" / "notes.txt") << "skip me";
  auto loaded = load_image_folder(dir);
  CHECK(loaded.size() == 4);
  CHECK(loaded.class_names == std::vector<std::string>{"a_class", "b_class"});
  CHECK(loaded.samples[0].label == 0);
  auto rgb = to_rgb8(loaded.samples[0].image);
  CHECK(rgb.size() == 16 * 16 * 3);
}

TEST_CASE("photometric identities and view strategies") {
  auto img = synth_dataset(1, 1, 32, 3).samples[0].image;
  CHECK(adjust_brightness(img, 1.0) == img);
  CHECK(adjust_contrast(img, 1.0) == img);
  CHECK(adjust_saturation(img, 1.0) == img);
  CHECK(adjust_hue(img, 0.0) == img);
  auto g = grayscale(img);
  CHECK(g.at(5, 7, 0) == g.at(5, 7, 2));
  CHECK(hflip(hflip(img)) == img);
  CHECK_THROWS_AS(crop(img, {30, 0, 8, 8}), GeometryError);

  AugmentConfig cfg;
  cfg.blur_kernel = 3;
  for (auto strategy : {ViewStrategy::kNone, ViewStrategy::kSame, ViewStrategy::kDifferent}) {
    cfg.views = strategy;
    Rng rng(4);
    auto v = make_views(img, 32, cfg, rng);
    CHECK(v.view1.height == 32);
    if (strategy != ViewStrategy::kDifferent) CHECK(v.view1 == v.view2);
  }
  cfg.views = ViewStrategy::kDifferent;
  int differ = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    auto v = make_views(img, 32, cfg, rng);
    differ += v.view1 == v.view2 ? 0 : 1;
  }
  CHECK(differ > 0);
}

TEST_CASE("random resized crop respects the area and aspect ranges") {
  AugmentConfig cfg;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    auto d = sample_crop(100, 80, cfg, rng);
    CHECK(d.rect.top >= 0);
    CHECK(d.rect.left >= 0);
    CHECK(d.rect.top + d.rect.height <= 100);
    CHECK(d.rect.left + d.rect.width <= 80);
    CHECK(d.rect.height > 0);
  }
}
