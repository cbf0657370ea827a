// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.
//
//   scott_acceptance [--work DIR] [--only N[,N...]]

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "oracles.hpp"
#include "scott/pca.hpp"
#include "scott/probe.hpp"
#include "scott/schedule.hpp"
#include "scott/threading.hpp"
#include "scott/trainer.hpp"
#include "support.hpp"

using namespace scott;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

test::Dense as_dense(const Tensor<double>& t) {
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), std::vector<double>(t.data().begin(), t.data().end())};
}

double max_diff(const Tensor<double>& a, const test::Dense& b) {
  if (a.numel() != static_cast<std::int64_t>(b.v.size())) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < b.v.size(); ++i) m = std::max(m, std::abs(a[i] - b.v[i]));
  return m;
}

// 1 ----------------------------------------------------------------------------
Outcome sparse_dense() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto B = rng.randint(1, 2), H = rng.randint(5, 16), W = rng.randint(5, 16);
    const auto cin = rng.randint(1, 4), cout = rng.randint(1, 6);
    const auto K = 2 * rng.randint(0, 3) + 1, stride = rng.randint(1, 2), pad = K / 2;
    auto x = test::randn<double>({B, H, W, cin}, rng);
    auto w = test::randn<double>({cout, cin, K, K}, rng);
    auto b = test::randn<double>({cout}, rng);
    const auto xd = as_dense(x);
    worst = std::max(worst, max_diff(sparse_conv2d(dense_map(x), w, b, stride, pad).features,
                                     test::dense_conv(xd, {w.data().begin(), w.data().end()},
                                                      {b.data().begin(), b.data().end()}, cout, K, stride, pad)));
    worst = std::max(worst, max_diff(sparse_relu(dense_map(x)).features, test::dense_relu(xd)));
    worst = std::max(worst, max_diff(sparse_max_blur_pool(dense_map(x)).features, test::dense_max_blur_pool(xd)));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-6 && t < 60, "max |sparse - dense| " + fmt("%.2e", worst) + " over 50 instances (" + fmt("%.1f", t) + " s)"};
}

// 2 ----------------------------------------------------------------------------
Outcome mask_alignment() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  ScottStem<float> stem(EncoderConfig::scott12_16().stem, rng);
  int matched = 0;
  for (int i = 0; i < 100; ++i) {
    auto img = test::randn<float>({1, 224, 224, 3}, rng);
    std::vector<MaskSet> m{blockwise_mask(14, 14, rng.uniform(0.1, 0.9), rng)};
    auto grid = stem.tokenize(mask_to_pixel_holes(img, std::span<const MaskSet>(m), 16));
    if (grid.grid_h == 14 && grid.grid_w == 14 && grid.active == m[0].visibility()) ++matched;
  }
  const double t = seconds_since(t0);
  return {matched == 100 && t < 120,
          std::to_string(matched) + "/100 stem activity maps equal patch visibility at 224x224 (" + fmt("%.1f", t) + " s)"};
}

// 3 ----------------------------------------------------------------------------
Outcome no_leakage() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = TrainConfig::desk();
  Rng rng(3);
  JepaModel<float> model(cfg, rng);
  bool outputs_same = true, grads_zero = true;
  std::int64_t checked = 0;
  for (int trial = 0; trial < 4; ++trial) {
    auto x = test::randn<float>({2, 64, 64, 3}, rng);
    std::vector<MaskSet> masks{blockwise_mask(4, 4, 0.6, rng, cfg.blockwise), random_mask(4, 4, 0.5, rng)};
    Tensor<float> target;
    {
      NoGrad ng;
      target = normalize_targets(model.target(x));
    }
    auto xg = x.clone();
    xg.set_requires_grad();
    Tensor<float> pred, tokens;
    {
      Tape<float> tape;
      auto grid = model.context.tokenizer(xg, masks);
      tokens = grid.tokens.detach();
      pred = model.predictor(model.context.encode_tokens(grid));
      tape.backward(masked_loss(pred, target, masks, 1.0f));
    }
    auto perturbed = x.clone();
    auto pd = perturbed.mutable_data();
    for (std::int64_t b = 0; b < 2; ++b)
      for (std::int64_t y = 0; y < 64; ++y)
        for (std::int64_t xx = 0; xx < 64; ++xx) {
          if (!masks[static_cast<std::size_t>(b)].is_masked((y / 16) * 4 + xx / 16)) continue;
          for (std::int64_t c = 0; c < 3; ++c) {
            const auto i = static_cast<std::size_t>(((b * 64 + y) * 64 + xx) * 3 + c);
            pd[i] += static_cast<float>(5.0 * rng.normal());
            if (xg.grad_data()[i] != 0.0f) grads_zero = false;
            ++checked;
          }
        }
    NoGrad ng;
    auto grid2 = model.context.tokenizer(perturbed, masks);
    for (std::int64_t r = 0; r < 2 * 16; ++r) {
      if (!grid2.active[static_cast<std::size_t>(r)]) continue;
      for (std::int64_t j = 0; j < cfg.encoder.backbone.dim; ++j) {
        const auto i = static_cast<std::size_t>(r * cfg.encoder.backbone.dim + j);
        if (grid2.tokens[i] != tokens[i]) outputs_same = false;
      }
    }
    auto pred2 = model.predictor(model.context.encode_tokens(grid2));
    for (std::int64_t i = 0; i < pred.numel(); ++i)
      if (pred2[static_cast<std::size_t>(i)] != pred[static_cast<std::size_t>(i)]) outputs_same = false;
  }
  const double t = seconds_since(t0);
  return {outputs_same && grads_zero && t < 60,
          std::string("active stem outputs and predictions ") + (outputs_same ? "unchanged" : "CHANGED") +
              " under masked-pixel edits; loss gradient at " + std::to_string(checked) + " masked pixels " +
              (grads_zero ? "exactly zero" : "NONZERO") + " (" + fmt("%.1f", t) + " s)"};
}

// 4 ----------------------------------------------------------------------------
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, double> worst;
  using Fn = std::function<test::GradCheck(Rng&)>;
  auto loss_of = [](const Tensor<double>& out, const Tensor<double>& r) { return ops::sum(ops::mul(out, r)); };
  std::vector<std::pair<std::string, Fn>> checks = {
      {"linear", [&](Rng& g) {
         auto x = test::leaf<double>({3, 4}, g), w = test::leaf<double>({4, 5}, g), b = test::leaf<double>({5}, g);
         auto r = test::randn<double>({3, 5}, g);
         return test::grad_check({x, w, b}, [&] { return loss_of(ops::linear(x, w, b), r); });
       }},
      {"layer_norm", [&](Rng& g) {
         auto x = test::leaf<double>({4, 6}, g), ga = test::leaf<double>({6}, g), be = test::leaf<double>({6}, g);
         auto r = test::randn<double>({4, 6}, g);
         return test::grad_check({x, ga, be}, [&] { return loss_of(ops::layer_norm(x, ga, be), r); });
       }},
      {"softmax", [&](Rng& g) {
         auto x = test::leaf<double>({3, 5}, g);
         auto r = test::randn<double>({3, 5}, g);
         return test::grad_check({x}, [&] { return loss_of(ops::softmax(x), r); });
       }},
      {"silu/relu/gelu", [&](Rng& g) {
         auto x = test::leaf<double>({3, 5}, g);
         auto r = test::randn<double>({3, 5}, g);
         return test::grad_check({x}, [&] {
           return ops::add(ops::add(loss_of(ops::silu(x), r), loss_of(ops::relu(x), r)), loss_of(ops::gelu(x), r));
         });
       }},
      {"swiglu", [&](Rng& g) {
         SwiGLU<double> ffn(6, 10, g);
         for (auto* l : {&ffn.w1, &ffn.w2, &ffn.w3})
           for (auto& v : l->weight.mutable_data()) v *= 20.0;
         auto x = test::leaf<double>({2, 3, 6}, g);
         auto r = test::randn<double>({2, 3, 6}, g);
         return test::grad_check({x, ffn.w1.weight, ffn.w2.weight, ffn.w3.weight, ffn.w1.bias, ffn.w2.bias},
                                 [&] { return loss_of(ffn(x), r); });
       }},
      {"attention", [&](Rng& g) {
         auto q = test::leaf<double>({2, 3, 8}, g), k = test::leaf<double>({2, 5, 8}, g), v = test::leaf<double>({2, 5, 8}, g);
         auto r = test::randn<double>({2, 3, 8}, g);
         return test::grad_check({q, k, v}, [&] { return loss_of(ops::attention(q, k, v, 2), r); });
       }},
      {"smooth_l1", [&](Rng& g) {
         auto p = test::leaf<double>({4, 3}, g, 1.5);
         auto t = test::randn<double>({4, 3}, g, 1.5);
         return test::grad_check({p}, [&] { return ops::smooth_l1(p, t, 1.0); });
       }},
      {"cross_entropy", [&](Rng& g) {
         auto p = test::leaf<double>({4, 3}, g);
         std::vector<std::int64_t> labels{0, 2, 1, 2};
         return test::grad_check({p}, [&] { return ops::cross_entropy(p, labels); });
       }},
      {"sparse_conv", [&](Rng& g) {
         auto x = test::leaf<double>({2, 8, 8, 2}, g), w = test::leaf<double>({3, 2, 3, 3}, g), b = test::leaf<double>({3}, g);
         std::vector<MaskSet> m{random_mask(4, 4, 0.4, g), random_mask(4, 4, 0.25, g)};
         auto r = test::randn<double>({2, 4, 4, 3}, g);
         return test::grad_check({x, w, b}, [&] {
           return loss_of(sparse_relu(sparse_conv2d(mask_to_pixel_holes(x, std::span<const MaskSet>(m), 2), w, b, 2, 1)).features, r);
         });
       }},
      {"blur_pool", [&](Rng& g) {
         auto x = test::leaf<double>({2, 8, 8, 2}, g);
         std::vector<MaskSet> m{random_mask(4, 4, 0.4, g), random_mask(4, 4, 0.25, g)};
         auto r = test::randn<double>({2, 4, 4, 2}, g);
         return test::grad_check({x}, [&] {
           return loss_of(sparse_max_blur_pool(mask_to_pixel_holes(x, std::span<const MaskSet>(m), 2)).features, r);
         });
       }},
      {"mask_tokens/gather", [&](Rng& g) {
         auto x = test::leaf<double>({2, 3, 4}, g), fill = test::leaf<double>({4}, g);
         std::vector<std::uint8_t> act{1, 0, 1, 0, 0, 1};
         std::vector<std::int64_t> rows{1, 0, 5, 5};
         auto r = test::randn<double>({4, 4}, g);
         return test::grad_check({x, fill}, [&] {
           return loss_of(ops::gather_rows(ops::reshape(ops::substitute_rows(x, act, fill), {6, 4}), rows), r);
         });
       }},
      {"mean/permute/concat", [&](Rng& g) {
         auto x = test::leaf<double>({2, 3, 4}, g), y = test::leaf<double>({2, 3, 4}, g);
         auto r = test::randn<double>({2, 4}, g);
         return test::grad_check({x, y}, [&] {
           auto c = ops::concat(std::vector<Tensor<double>>{ops::permute(x, {0, 2, 1}), ops::transpose(y)}, 2);
           return loss_of(ops::mean_axis(c, 2), r);
         });
       }},
  };
  for (const auto& [name, fn] : checks)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng g(seed * 7919 + 1);
      worst[name] = std::max(worst[name], fn(g).worst);
    }
  double overall = 0;
  std::string worst_name;
  for (const auto& [k, v] : worst)
    if (v >= overall) {
      overall = v;
      worst_name = k;
    }
  const double t = seconds_since(t0);
  return {overall < 1e-4 && t < 300, std::to_string(checks.size()) + " op groups x 20 seeds, worst relative error " +
                                         fmt("%.2e", overall) + " (" + worst_name + ", " + fmt("%.1f", t) + " s)"};
}

// 5 ----------------------------------------------------------------------------
Outcome parameter_counts() {
  Rng rng(0);
  VisionEncoder<float> s7(EncoderConfig::scott7_16(), rng), s12(EncoderConfig::scott12_16(), rng);
  const double n7 = static_cast<double>(count_parameters(s7.parameters()));
  const double n12 = static_cast<double>(count_parameters(s12.parameters()));
  const bool ok = std::abs(n7 / 13.6e6 - 1) < 0.05 && std::abs(n12 / 22.4e6 - 1) < 0.05 &&
                  n7 == static_cast<double>(encoder_parameter_count(EncoderConfig::scott7_16())) &&
                  n12 == static_cast<double>(encoder_parameter_count(EncoderConfig::scott12_16()));
  return {ok, "SCOTT-7/16 " + fmt("%.0f", n7) + " (" + fmt("%+.2f", 100 * (n7 / 13.6e6 - 1)) + "% vs 13.6 M), SCOTT-12/16 " +
                  fmt("%.0f", n12) + " (" + fmt("%+.2f", 100 * (n12 / 22.4e6 - 1)) + "% vs 22.4 M)"};
}

// 6 ----------------------------------------------------------------------------
Outcome schedules() {
  ScheduleConfig s;
  bool ok = lr_at(0, s) == 1e-6 && lr_at(s.warmup_end(), s) == 5e-4 && lr_at(1, s) == 1e-5;
  double jump = 0;
  for (double j : {s.warmup_end(), s.flat_end()}) {
    const double e = 1e-13;
    jump = std::max(jump, std::abs(lr_at(j - e, s) - lr_at(j, s)));
    jump = std::max(jump, std::abs(lr_at(j + e, s) - lr_at(j, s)));
  }
  ok = ok && jump < 1e-12;
  ok = ok && wd_at(0, s) == 0.04 && wd_at(1, s) == 0.4 && ema_at(0, s) == 0.996 && ema_at(1, s) == 1.0;
  return {ok, "lr 1e-6 / 5e-4 / 1e-5 at t = 0 / warmup / 1, max jump at joins " + fmt("%.1e", jump) +
                  ", wd 0.04 -> 0.4, ema 0.996 -> 1.0"};
}

// 7 ----------------------------------------------------------------------------
Outcome masked_loss_restriction() {
  bool invariant = true, zero = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto target = normalize_targets(test::randn<float>({2, 16, 12}, rng));
    std::vector<MaskSet> masks{blockwise_mask(4, 4, 0.5, rng, {2, 0.3}), random_mask(4, 4, 0.3, rng)};
    auto pred = test::randn<float>({2, 16, 12}, rng);
    const float l0 = masked_loss(pred, target, masks, 1.0f).item();
    auto edited = pred.clone();
    for (std::int64_t b = 0; b < 2; ++b)
      for (auto p : masks[static_cast<std::size_t>(b)].context())
        for (std::int64_t j = 0; j < 12; ++j)
          edited.mutable_data()[static_cast<std::size_t>((b * 16 + p) * 12 + j)] = static_cast<float>(1e3 * rng.normal());
    if (masked_loss(edited, target, masks, 1.0f).item() != l0) invariant = false;
    if (masked_loss(target.clone(), target, masks, 1.0f).item() != 0.0f) zero = false;
  }
  return {invariant && zero, std::string("100 draws: loss ") + (invariant ? "bit-identical" : "CHANGED") +
                                 " under edits outside M, " + (zero ? "exactly 0" : "NONZERO") + " at the targets"};
}

// 8 ----------------------------------------------------------------------------
Outcome masking_contracts() {
  bool exact = true;
  double blk = 0, rnd = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng a(seed), b(seed ^ 0xabcdef);
    auto mb = blockwise_mask(14, 14, 0.6, a);
    auto mr = random_mask(14, 14, 0.6, b);
    exact = exact && mb.masked.size() == 117 && mr.masked.size() == 117;
    Rng c(seed + 5000);
    const double ratio = c.uniform(0.05, 0.95);
    exact = exact && static_cast<std::int64_t>(blockwise_mask(14, 14, ratio, c).masked.size()) == masked_count(196, ratio);
    blk += mask_contiguity(mb) / 1000;
    rnd += mask_contiguity(mr) / 1000;
  }
  return {exact && blk > rnd, std::string("|M| = floor(ratio N) ") + (exact ? "always" : "NOT always") +
                                  "; mean contiguity blockwise " + fmt("%.3f", blk) + " vs random " + fmt("%.3f", rnd) +
                                  " over 1000 seeds"};
}

// 9 ----------------------------------------------------------------------------
struct SmokeRun {
  bool done = false;
  fs::path checkpoint;
  TrainConfig cfg;
};

Outcome smoke_pretraining(const fs::path& work, SmokeRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  run.cfg = TrainConfig::desk();
  run.cfg.checkpoint_every = 25;
  auto data = synth_dataset(512, 4, 64, run.cfg.seed);
  PretrainOptions opts;
  opts.out_dir = work / "smoke";
  fs::remove_all(opts.out_dir);
  std::vector<StepMetrics> metrics;
  bool finite = true;
  double min_std = INFINITY;
  opts.on_step = [&](const StepMetrics& m) {
    metrics.push_back(m);
    min_std = std::min(min_std, m.target_std);
    if (m.step % 20 == 0)
      std::fprintf(stderr, "  smoke step %3lld loss %.5f target_std %.4f\n", static_cast<long long>(m.step), m.loss,
                   m.target_std);
  };
  try {
    auto res = pretrain(data, run.cfg, opts);
    run.checkpoint = res.last_checkpoint;
    run.done = true;
  } catch (const NumericError& e) {
    finite = false;
  }
  const double t = seconds_since(t0);
  if (metrics.size() < 20) return {false, "only " + std::to_string(metrics.size()) + " steps ran"};
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += metrics[i].loss / 10;
    last += metrics[metrics.size() - 10 + i].loss / 10;
  }
  for (const auto& m : metrics) finite = finite && std::isfinite(m.loss);
  const bool ok = run.done && metrics.size() == 200 && finite && last < first && min_std > 1e-3 && t < 900;
  return {ok, std::to_string(metrics.size()) + " steps: first-10 mean loss " + fmt("%.5f", first) + ", last-10 " +
                  fmt("%.5f", last) + ", min target std " + fmt("%.4f", min_std) + (finite ? ", finite" : ", NaN") +
                  " (" + fmt("%.0f", t) + " s)"};
}

// 10 ---------------------------------------------------------------------------
Outcome probe_separability(const SmokeRun& run) {
  if (!run.done) return {false, "no checkpoint from the smoke run"};
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg;
  auto enc = load_encoder(read_checkpoint(run.checkpoint), cfg);
  cfg.probe.kind = ProbeKind::kLinear;
  cfg.probe.epochs = 50;
  auto train = synth_dataset(512, 4, 64, cfg.seed);
  auto held_out = synth_dataset(256, 4, 64, cfg.seed + 1);
  auto probe = train_probe(enc, train, cfg, cfg.seed);
  const auto tr = evaluate(enc, probe, train, cfg);
  const auto te = evaluate(enc, probe, held_out, cfg);
  const double t = seconds_since(t0);
  return {te.top1 >= 0.8 && t < 600, "linear probe, 50 epochs: held-out top-1 " + fmt("%.1f", 100 * te.top1) +
                                         "% (train " + fmt("%.1f", 100 * tr.top1) + "%, chance 25%, " + fmt("%.0f", t) + " s)"};
}

// 11 ---------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = TrainConfig::desk();
  cfg.image_size = 32;
  cfg.batch = 8;
  cfg.schedule.epochs = 2;
  cfg.schedule.warmup_epochs = 1;
  cfg.encoder.backbone = {32, 1, 2, 0};
  cfg.encoder.stem.dim = 32;
  cfg.encoder.stem.hidden = 8;
  cfg.predictor = {1, 32, 2, 0};
  cfg.blockwise.min_block = 2;
  cfg.probe.heads = 2;
  cfg.seed = 17;
  auto data = synth_dataset(24, 4, 32, cfg.seed);
  const auto root = work / "determinism";
  fs::remove_all(root);
  auto run = [&](const std::string& name, std::optional<fs::path> resume, std::int64_t stop) {
    PretrainOptions o;
    o.out_dir = root / name;
    o.resume = std::move(resume);
    o.stop_at = stop;
    return pretrain(data, cfg, o);
  };
  auto a = run("a", {}, -1);
  auto b = run("b", {}, -1);
  const bool same_seed = slurp(a.last_checkpoint) == slurp(b.last_checkpoint);
  const std::int64_t k = 3;
  auto part = run("c", {}, k);
  auto rest = run("c", part.last_checkpoint, -1);
  const bool next_step = !rest.metrics.empty() && rest.metrics.front().step == k &&
                         rest.metrics.front().loss == a.metrics[static_cast<std::size_t>(k)].loss &&
                         rest.metrics.front().grad_norm == a.metrics[static_cast<std::size_t>(k)].grad_norm;
  const bool end_same = slurp(rest.last_checkpoint) == slurp(a.last_checkpoint);
  const double t = seconds_since(t0);
  return {same_seed && next_step && end_same,
          std::string("same seed: checkpoints ") + (same_seed ? "bit-identical" : "DIFFER") + "; resume at step " +
              std::to_string(k) + ": step " + std::to_string(k + 1) + (next_step ? " reproduced exactly" : " DIFFERS") +
              ", final checkpoint " + (end_same ? "identical" : "DIFFERS") + " (" + fmt("%.1f", t) + " s)"};
}

// 12 ---------------------------------------------------------------------------
Outcome pca_oracle() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<double> x(400);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal() * (1.0 + static_cast<double>(i % 8));
    auto r = pca(x, 50, 8, 3);
    std::vector<double> vals, vecs;
    test::jacobi_eigen(test::covariance(x, 50, 8), 8, vals, vecs);
    for (std::size_t c = 0; c < 3; ++c) {
      double dot = 0;
      for (std::size_t j = 0; j < 8; ++j) dot += r.components[c * 8 + j] * vecs[c * 8 + j];
      const double sign = dot < 0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < 8; ++j) worst = std::max(worst, std::abs(r.components[c * 8 + j] - sign * vecs[c * 8 + j]));
      worst = std::max(worst, std::abs(r.explained_variance[c] - vals[c]));
    }
  }
  bool first_only = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<double> proj(60);
    for (auto& v : proj) v = rng.normal();
    const auto fg = foreground_split(proj, 3);
    for (std::size_t i = 0; i < proj.size(); ++i)
      if (i % 3 != 0) proj[i] = 1e6 * rng.normal();
    first_only = first_only && foreground_split(proj, 3) == fg;
  }
  return {worst < 1e-6 && first_only, "50 random 50x8 matrices: max deviation from Jacobi " + fmt("%.2e", worst) +
                                          " (up to sign); foreground split " +
                                          (first_only ? "depends only on column 1" : "READS OTHER COLUMNS")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work = (fs::temp_directory_path() / "scott_acceptance").string();
  std::vector<int> only;
  int threads = 1;
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--threads", threads, "Threads");
  CLI11_PARSE(app, argc, argv);
  set_num_threads(threads);
  fs::create_directories(work);

  SmokeRun smoke;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sparse ops reduce to dense ops", sparse_dense},
      {"mask non-vanishing and alignment", mask_alignment},
      {"no leakage from masked pixels", no_leakage},
      {"finite-difference gradients", gradients},
      {"parameter counts", parameter_counts},
      {"schedule closed forms", schedules},
      {"masked-loss restriction", masked_loss_restriction},
      {"masking contracts", masking_contracts},
      {"smoke pretraining", [&] { return smoke_pretraining(work, smoke); }},
      {"probe separability", [&] {
         if (!smoke.done && !only.empty() && std::find(only.begin(), only.end(), 9) == only.end())
           smoke_pretraining(work, smoke);
         return probe_separability(smoke);
       }},
      {"determinism and resume", [&] { return determinism(work); }},
      {"PCA oracle", pca_oracle},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  %2d  %-34s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
