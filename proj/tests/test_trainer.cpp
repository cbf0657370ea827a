#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scott/probe.hpp"
#include "scott/trainer.hpp"
#include "support.hpp"

using namespace scott;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny() {
  TrainConfig c;
  c.image_size = 32;
  c.batch = 4;
  c.schedule.epochs = 2;
  c.schedule.warmup_epochs = 1;
  c.encoder.backbone = {16, 1, 2, 0};
  c.encoder.stem.dim = 16;
  c.encoder.stem.hidden = 4;
  c.predictor = {1, 16, 2, 0};
  c.blockwise.min_block = 1;
  c.augment.blur_kernel = 3;
  c.probe.epochs = 2;
  c.probe.heads = 2;
  c.probe.batch = 4;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("EMA update endpoints and mismatch") {
  Rng rng(0);
  NamedTensors<float> online{{"a", test::randn<float>({3}, rng)}};
  NamedTensors<float> target{{"a", test::randn<float>({3}, rng)}};
  const auto before = target[0].second.clone();
  ema_update(target, online, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(target[0].second[i] == before[i]);
  ema_update(target, online, 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(target[0].second[i] == online[0].second[i]);
  NamedTensors<float> other{{"b", test::randn<float>({3}, rng)}};
  CHECK_THROWS_AS(ema_update(target, other, 0.5), StateError);
}

TEST_CASE("masked loss ignores unmasked rows and vanishes at the target") {
  Rng rng(1);
  auto target = normalize_targets(test::randn<double>({2, 4, 6}, rng));
  std::vector<MaskSet> masks{MaskSet::from_indices(2, 2, {0, 3}), MaskSet::from_indices(2, 2, {2})};
  auto pred = test::randn<double>({2, 4, 6}, rng);
  const double l0 = masked_loss(pred, target, masks, 1.0).item();
  auto edited = pred.clone();
  for (std::int64_t row : {1, 2, 4, 5, 7})
    for (std::int64_t j = 0; j < 6; ++j) edited.mutable_data()[static_cast<std::size_t>(row * 6 + j)] += 100.0;
  CHECK(masked_loss(edited, target, masks, 1.0).item() == l0);
  CHECK(masked_loss(target.clone(), target, masks, 1.0).item() == 0.0);
  CHECK(masked_rows(masks) == std::vector<std::int64_t>{0, 3, 6});
}

TEST_CASE("target features are normalized per token") {
  Rng rng(2);
  auto n = normalize_targets(test::randn<double>({3, 8}, rng, 5.0));
  for (int r = 0; r < 3; ++r) {
    double m = 0, v = 0;
    for (int j = 0; j < 8; ++j) m += n[static_cast<std::size_t>(r * 8 + j)] / 8;
    for (int j = 0; j < 8; ++j) v += std::pow(n[static_cast<std::size_t>(r * 8 + j)] - m, 2) / 8;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("target encoder starts as a copy and receives no gradient") {
  auto cfg = tiny();
  auto state = make_train_state(cfg);
  auto ctx = state.model.context.parameters();
  auto tgt = state.model.target.parameters();
  REQUIRE(ctx.size() == tgt.size());
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    CHECK(ctx[i].first == tgt[i].first);
    CHECK_FALSE(tgt[i].second.requires_grad());
    for (std::int64_t j = 0; j < ctx[i].second.numel(); ++j)
      CHECK(ctx[i].second[static_cast<std::size_t>(j)] == tgt[i].second[static_cast<std::size_t>(j)]);
  }
  auto data = synth_dataset(8, 2, 32, 0);
  Rng mrng(0);
  auto batch = make_batch(data, cfg, 0, mrng);
  CHECK(batch.context_images.dim(0) == 8);  // independent: both views are examples
  CHECK(batch.masks.size() == 8);
  auto m = train_step(state, batch, cfg, 4);
  CHECK(std::isfinite(m.loss));
  CHECK(m.target_std > 0);
  for (const auto& [name, t] : state.model.target.parameters()) CHECK_FALSE(t.has_grad());
}

TEST_CASE("paired consumption feeds one view to each encoder") {
  auto cfg = tiny();
  cfg.consumption = ViewConsumption::kPaired;
  auto data = synth_dataset(8, 2, 32, 0);
  Rng mrng(0);
  auto batch = make_batch(data, cfg, 0, mrng);
  CHECK(batch.context_images.dim(0) == 4);
  CHECK(batch.masks.size() == 4);
}

TEST_CASE("pretraining is deterministic and resumes exactly") {
  auto cfg = tiny();
  auto data = synth_dataset(8, 2, 32, 0);
  const auto root = fs::temp_directory_path() / "scott_test_pretrain";
  fs::remove_all(root);
  PretrainOptions a{root / "a", {}, -1, 2, {}};
  PretrainOptions b{root / "b", {}, -1, 2, {}};
  auto ra = pretrain(data, cfg, a);
  auto rb = pretrain(data, cfg, b);
  CHECK(ra.total_steps == 4);
  CHECK(slurp(ra.last_checkpoint) == slurp(rb.last_checkpoint));
  CHECK(fs::exists(root / "a" / "metrics.jsonl"));
  CHECK(fs::exists(root / "a" / "manifest.json"));

  PretrainOptions c{root / "c", {}, 1, 2, {}};
  auto rc = pretrain(data, cfg, c);
  CHECK(rc.metrics.size() == 1);
  PretrainOptions d{root / "c", rc.last_checkpoint, -1, 2, {}};
  auto rd = pretrain(data, cfg, d);
  CHECK(rd.metrics.front().step == 1);
  CHECK(rd.metrics.front().loss == ra.metrics[1].loss);
  CHECK(slurp(rd.last_checkpoint) == slurp(ra.last_checkpoint));

  auto other = cfg;
  other.seed = 99;
  PretrainOptions e{root / "e", rc.last_checkpoint, -1, 2, {}};
  CHECK_THROWS_AS(pretrain(data, other, e), ConfigError);
}

TEST_CASE("probe on frozen features and its checkpoint") {
  auto cfg = tiny();
  auto state = make_train_state(cfg);
  auto data = synth_dataset(8, 2, 32, 0);
  auto before = state.model.target.parameters()[0].second.clone();
  for (auto kind : {ProbeKind::kLinear, ProbeKind::kAttentive}) {
    cfg.probe.kind = kind;
    auto probe = train_probe(state.model.target, data, cfg, 0);
    CHECK(probe.kind() == kind);
    auto r = evaluate(state.model.target, probe, data, cfg);
    CHECK(r.count == 8);
    CHECK(r.top5 == 1.0);  // only two classes
    auto ck = probe_checkpoint(probe, cfg, "abc");
    auto back = load_probe(ck, 16);
    auto r2 = evaluate(state.model.target, back, data, cfg);
    CHECK(r2.top1 == r.top1);
  }
  auto after = state.model.target.parameters()[0].second;
  for (std::int64_t i = 0; i < before.numel(); ++i)
    CHECK(before[static_cast<std::size_t>(i)] == after[static_cast<std::size_t>(i)]);
  CHECK_THROWS_AS(evaluate(state.model.target, train_probe(state.model.target, data, cfg, 0), Dataset{}, cfg),
                  ContractError);
}

TEST_CASE("top-k accuracy breaks ties toward the lower index") {
  Tensor<float> logits({2, 3}, {1, 1, 0, 0, 2, 2});
  std::vector<std::int64_t> labels{1, 1};
  CHECK(topk_accuracy(logits, labels, 1) == 0.5);
  CHECK(topk_accuracy(logits, labels, 2) == 1.0);
}

TEST_CASE("attentive probe adds the attention output back to the query") {
  Rng rng(3);
  AttentiveProbe<double> p(8, 3, 2, rng);
  auto feats = test::randn<double>({2, 5, 8}, rng);
  auto att = p.attend(feats);
  CHECK(att.shape() == Shape{2, 1, 8});
  CHECK(p(feats).shape() == Shape{2, 3});
  auto x = test::leaf<double>({2, 5, 8}, rng);
  auto r = test::randn<double>({2, 3}, rng);
  CHECK(test::grad_check({x, p.query}, [&] { return ops::sum(ops::mul(p(x), r)); }).ok());
}
