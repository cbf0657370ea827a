#include "scott/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "scott/errors.hpp"
#include "scott/ops.hpp"
#include "scott/schedule.hpp"
#include "scott/threading.hpp"

#ifndef SCOTT_VERSION
#define SCOTT_VERSION "dev"
#endif

namespace scott {

namespace fs = std::filesystem;

template <Real T>
void ema_update(NamedTensors<T>& target, const NamedTensors<T>& online, double m) {
  if (target.size() != online.size()) throw StateError("EMA: parameter lists differ in length");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].first != online[i].first) {
      throw StateError("EMA: name mismatch '" + target[i].first + "' vs '" + online[i].first + "'");
    }
    if (target[i].second.shape() != online[i].second.shape()) throw StateError("EMA: shape mismatch at '" + target[i].first + "'");
    if (m == 1.0) continue;
    auto dst = target[i].second.mutable_data();
    const auto src = online[i].second.data();
    if (m == 0.0) {
      std::copy(src.begin(), src.end(), dst.begin());
      continue;
    }
    const T a = static_cast<T>(m), b = static_cast<T>(1.0 - m);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = a * dst[j] + b * src[j];
  }
}

template <Real T>
Tensor<T> normalize_targets(const Tensor<T>& features) {
  return ops::layer_norm(features, Tensor<T>(), Tensor<T>(), T(1e-6));
}

std::vector<std::int64_t> masked_rows(std::span<const MaskSet> masks) {
  std::vector<std::int64_t> rows;
  for (std::size_t b = 0; b < masks.size(); ++b) {
    const auto n = masks[b].num_patches();
    for (auto i : masks[b].masked) rows.push_back(static_cast<std::int64_t>(b) * n + i);
  }
  return rows;
}

template <Real T>
Tensor<T> masked_loss(const Tensor<T>& pred, const Tensor<T>& target, std::span<const MaskSet> masks, T beta) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  }
  if (pred.rank() != 3 || pred.dim(0) != static_cast<std::int64_t>(masks.size())) {
    throw DimensionError("masked_loss expects [B x N x d] with one MaskSet per row");
  }
  const auto B = pred.dim(0), N = pred.dim(1), d = pred.dim(2);
  for (const auto& m : masks)
    if (m.num_patches() != N) throw DimensionError("mask grid does not match the token count");
  const auto rows = masked_rows(masks);
  if (rows.empty()) throw ContractError("masked_loss: no masked positions");
  auto p = ops::gather_rows(ops::reshape(pred, {B * N, d}), rows);
  auto t = ops::gather_rows(ops::reshape(target.detach(), {B * N, d}), rows);
  return ops::smooth_l1(p, t, beta);
}

template <Real T>
JepaModel<T>::JepaModel(const TrainConfig& cfg, Rng& rng)
    : context(cfg.encoder, rng), target(cfg.encoder, rng), predictor(cfg.encoder.backbone.dim, cfg.predictor, rng) {
  auto src = context.parameters();
  auto dst = target.parameters();
  copy_parameters(src, dst);
  for (auto& [name, p] : dst) p.set_requires_grad(false);
}

template <Real T>
NamedTensors<T> JepaModel<T>::trainable() const {
  NamedTensors<T> out;
  for (auto& [n, p] : context.parameters()) out.emplace_back("context." + n, p);
  for (auto& [n, p] : predictor.parameters()) out.emplace_back("predictor." + n, p);
  return out;
}

std::string StepMetrics::to_json() const {
  nlohmann::json j = {{"step", step},     {"epoch", epoch},           {"lr", lr},
                      {"wd", wd},         {"ema_m", ema_m},           {"loss", loss},
                      {"target_std", target_std}, {"target_std_min", target_std_min}, {"grad_norm", grad_norm}};
  return j.dump();
}

TrainState make_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  Rng init = Rng::derive(cfg.seed, {0x1417ull});
  s.model = JepaModel<float>(cfg, init);
  s.optim = AdamW<float>(s.model.trainable(), cfg.adamw);
  s.mask_rng = Rng::derive(cfg.seed, {0x3a5cull});
  return s;
}

namespace {

void feature_std(const Tensor<float>& s, double& mean_std, double& min_std) {
  const auto d = s.dim(-1);
  const auto rows = s.numel() / d;
  std::vector<double> mu(static_cast<std::size_t>(d), 0.0), sq(static_cast<std::size_t>(d), 0.0);
  const auto x = s.data();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < d; ++j) mu[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(r * d + j)];
  for (auto& v : mu) v /= static_cast<double>(rows);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < d; ++j) {
      const double c = x[static_cast<std::size_t>(r * d + j)] - mu[static_cast<std::size_t>(j)];
      sq[static_cast<std::size_t>(j)] += c * c;
    }
  mean_std = 0.0;
  min_std = INFINITY;
  for (auto v : sq) {
    const double sd = std::sqrt(v / static_cast<double>(rows));
    mean_std += sd;
    min_std = std::min(min_std, sd);
  }
  mean_std /= static_cast<double>(d);
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_d(const std::string& s) {
  double v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, {0xe90cull, static_cast<std::uint64_t>(epoch)});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.randint(0, static_cast<std::int64_t>(i) - 1))]);
  return idx;
}

JepaBatch<float> assemble(const std::vector<ViewPair>& views, const TrainConfig& cfg, Rng& mask_rng) {
  std::vector<Image> ctx, tgt;
  if (cfg.consumption == ViewConsumption::kIndependent) {
    for (const auto& v : views) ctx.push_back(v.view1);
    for (const auto& v : views) ctx.push_back(v.view2);
  } else {
    for (const auto& v : views) {
      ctx.push_back(v.view1);
      tgt.push_back(v.view2);
    }
  }
  JepaBatch<float> b;
  b.context_images = batch_tensor<float>(ctx);
  b.target_images = cfg.consumption == ViewConsumption::kIndependent ? b.context_images : batch_tensor<float>(tgt);
  const auto g = cfg.image_size / StemConfig::kPatch;
  for (std::size_t i = 0; i < ctx.size(); ++i)
    b.masks.push_back(draw_mask(cfg.mask_strategy, g, g, cfg.mask_ratio, mask_rng, cfg.blockwise));
  return b;
}

}  // namespace

StepMetrics train_step(TrainState& state, const JepaBatch<float>& batch, const TrainConfig& cfg, std::int64_t total_steps) {
  StepMetrics m;
  m.step = state.step;
  const double t = train_fraction(state.step, total_steps);
  m.lr = lr_at(t, cfg.schedule);
  m.wd = wd_at(t, cfg.schedule);
  m.ema_m = ema_at(t, cfg.schedule);

  Tensor<float> targets;
  {
    NoGrad guard;
    auto sy = state.model.target(batch.target_images);
    feature_std(sy, m.target_std, m.target_std_min);
    targets = normalize_targets(sy);
  }

  auto params = state.model.trainable();
  Tape<float> tape;
  auto sx = state.model.context(batch.context_images, batch.masks);
  auto pred = state.model.predictor(sx);
  auto loss = masked_loss(pred, targets, batch.masks, static_cast<float>(cfg.loss_beta));
  m.loss = loss.item();
  if (!std::isfinite(m.loss)) {
    throw NumericError("non-finite loss at step " + std::to_string(state.step) + " (lr " + fmt(m.lr) +
                       ", target_std " + fmt(m.target_std) + ")");
  }
  tape.backward(loss);
  m.grad_norm = grad_norm(params);
  if (!std::isfinite(m.grad_norm)) {
    for (auto& [n, p] : params) p.clear_grad();
    throw NumericError("non-finite gradient at step " + std::to_string(state.step));
  }
  state.optim.step(m.lr, m.wd);
  for (auto& [n, p] : params) p.clear_grad();
  auto tgt = state.model.target.parameters();
  ema_update(tgt, state.model.context.parameters(), m.ema_m);
  ++state.step;
  return m;
}

std::vector<ViewPair> make_step_views(const Dataset& data, const TrainConfig& cfg, std::int64_t step) {
  const auto n = static_cast<std::int64_t>(data.size());
  const auto spe = cfg.steps_per_epoch(n);
  const auto epoch = step / spe;
  const auto pos = step % spe;
  const auto order = epoch_order(data.size(), cfg.seed, epoch);
  const auto lo = pos * cfg.batch, hi = std::min(n, lo + cfg.batch);
  std::vector<ViewPair> views(static_cast<std::size_t>(hi - lo));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = lo; i < hi; ++i) {
    const auto sample = order[static_cast<std::size_t>(i)];
    Rng rng = Rng::derive(cfg.seed, {0xa06ull, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(sample)});
    views[static_cast<std::size_t>(i - lo)] = make_views(data.samples[sample].image, cfg.image_size, cfg.augment, rng);
  }
  return views;
}

JepaBatch<float> make_batch(const Dataset& data, const TrainConfig& cfg, std::int64_t step, Rng& mask_rng) {
  return assemble(make_step_views(data, cfg, step), cfg, mask_rng);
}

Checkpoint to_checkpoint(const TrainState& state, const TrainConfig& cfg) {
  Checkpoint ck;
  ck.config_text = cfg.to_text();
  ck.meta["kind"] = "pretrain";
  ck.meta["version"] = SCOTT_VERSION;
  ck.meta["step"] = std::to_string(state.step);
  ck.meta["optim_steps"] = std::to_string(state.optim.steps());
  ck.meta["best_loss"] = state.has_best ? fmt(state.best_loss) : "";
  ck.meta["mask_rng"] = state.mask_rng.state();
  ck.meta["epoch_loss_sum"] = fmt(state.epoch_loss_sum);
  ck.meta["epoch_loss_count"] = std::to_string(state.epoch_loss_count);
  ck.add_group("context.", state.model.context.parameters());
  ck.add_group("target.", state.model.target.parameters());
  ck.add_group("predictor.", state.model.predictor.parameters());
  ck.add_group("optim.", state.optim.state());
  return ck;
}

TrainState from_checkpoint(const Checkpoint& ckpt, TrainConfig& cfg_out) {
  if (ckpt.meta.count("kind") && ckpt.meta.at("kind") != "pretrain") throw CheckpointError("not a pretraining checkpoint");
  try {
    cfg_out = parse_config_text(ckpt.config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("embedded config is invalid: ") + e.what());
  }
  TrainState s = make_train_state(cfg_out);
  try {
    auto ctx = s.model.context.parameters();
    copy_parameters(ckpt.group("context."), ctx);
    auto tgt = s.model.target.parameters();
    copy_parameters(ckpt.group("target."), tgt);
    auto pred = s.model.predictor.parameters();
    copy_parameters(ckpt.group("predictor."), pred);
    s.optim.load_state(ckpt.group("optim."), std::stoll(ckpt.meta_value("optim_steps")));
  } catch (const StateError& e) {
    throw CheckpointError(std::string("checkpoint does not match its config: ") + e.what());
  }
  s.step = std::stoll(ckpt.meta_value("step"));
  const auto& best = ckpt.meta_value("best_loss");
  s.has_best = !best.empty();
  if (s.has_best) s.best_loss = parse_d(best);
  s.mask_rng.set_state(ckpt.meta_value("mask_rng"));
  s.epoch_loss_sum = parse_d(ckpt.meta_value("epoch_loss_sum"));
  s.epoch_loss_count = std::stoll(ckpt.meta_value("epoch_loss_count"));
  return s;
}

VisionEncoder<float> load_encoder(const Checkpoint& ckpt, TrainConfig& cfg_out, const std::string& which) {
  if (which != "target" && which != "context") throw ConfigError("encoder must be 'target' or 'context'", "--encoder");
  try {
    cfg_out = parse_config_text(ckpt.config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("embedded config is invalid: ") + e.what());
  }
  Rng rng(0);
  VisionEncoder<float> enc(cfg_out.encoder, rng);
  auto dst = enc.parameters();
  try {
    copy_parameters(ckpt.group(which + "."), dst);
  } catch (const StateError& e) {
    throw CheckpointError(std::string("checkpoint encoder does not match its config: ") + e.what());
  }
  for (auto& [n, p] : dst) p.set_requires_grad(false);
  return enc;
}

PretrainResult pretrain(const Dataset& data, const TrainConfig& cfg_in, const PretrainOptions& opts) {
  if (data.empty()) throw DataError("pretraining dataset is empty");
  TrainConfig cfg = cfg_in;
  TrainState state;
  if (opts.resume) {
    TrainConfig stored;
    state = from_checkpoint(read_checkpoint(*opts.resume), stored);
    if (stored.digest() != cfg.digest()) {
      throw ConfigError("config differs from the one stored in the resumed checkpoint", "--config");
    }
  } else {
    state = make_train_state(cfg);
  }

  const auto n = static_cast<std::int64_t>(data.size());
  const auto spe = cfg.steps_per_epoch(n);
  PretrainResult result;
  result.total_steps = cfg.total_steps(n);
  const auto end = opts.stop_at >= 0 ? std::min(opts.stop_at, result.total_steps) : result.total_steps;

  const fs::path ckdir = opts.out_dir / "checkpoints";
  fs::create_directories(ckdir);
  {
    std::ofstream(opts.out_dir / "config.txt") << cfg.to_text();
  }
  const auto started = utc_now();
  AsyncLineWriter metrics((opts.out_dir / "metrics.jsonl").string(), opts.resume.has_value());

  auto save = [&](const fs::path& p) { write_checkpoint(p, to_checkpoint(state, cfg)); };

  {
    Prefetcher<std::vector<ViewPair>> prefetch([&](std::int64_t s) { return make_step_views(data, cfg, s); }, state.step, end,
                                               opts.prefetch);
    while (state.step < end) {
      auto views = prefetch.next();
      if (!views) throw DataError("data pipeline ended early");
      const auto batch = assemble(*views, cfg, state.mask_rng);
      auto m = train_step(state, batch, cfg, result.total_steps);
      m.epoch = m.step / spe;
      metrics.write(m.to_json());
      if (opts.on_step) opts.on_step(m);
      result.metrics.push_back(m);
      state.epoch_loss_sum += m.loss;
      ++state.epoch_loss_count;
      if (state.step % spe == 0) {
        const auto epoch = state.step / spe;
        const double mean = state.epoch_loss_sum / static_cast<double>(state.epoch_loss_count);
        state.epoch_loss_sum = 0.0;
        state.epoch_loss_count = 0;
        const bool improved = !state.has_best || mean < state.best_loss;
        if (improved) {
          state.best_loss = mean;
          state.has_best = true;
          save(ckdir / "best.ckpt");
        }
        if (epoch % cfg.checkpoint_every == 0) {
          char name[32];
          std::snprintf(name, sizeof name, "epoch_%04lld.ckpt", static_cast<long long>(epoch));
          save(ckdir / name);
        }
      }
    }
  }
  metrics.close();
  result.last_checkpoint = ckdir / "last.ckpt";
  save(result.last_checkpoint);

  nlohmann::json manifest = {
      {"config_digest", hex64(cfg.digest())},
      {"code_version", SCOTT_VERSION},
      {"seed", cfg.seed},
      {"started", started},
      {"finished", utc_now()},
      {"steps_run", static_cast<std::int64_t>(result.metrics.size())},
      {"final_step", state.step},
      {"total_steps", result.total_steps},
      {"outputs",
       {{"config", (opts.out_dir / "config.txt").string()},
        {"metrics", (opts.out_dir / "metrics.jsonl").string()},
        {"checkpoints", ckdir.string()},
        {"last", result.last_checkpoint.string()}}},
  };
  std::ofstream(opts.out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return result;
}

template void ema_update(NamedTensors<float>&, const NamedTensors<float>&, double);
template void ema_update(NamedTensors<double>&, const NamedTensors<double>&, double);
template Tensor<float> normalize_targets(const Tensor<float>&);
template Tensor<double> normalize_targets(const Tensor<double>&);
template Tensor<float> masked_loss(const Tensor<float>&, const Tensor<float>&, std::span<const MaskSet>, float);
template Tensor<double> masked_loss(const Tensor<double>&, const Tensor<double>&, std::span<const MaskSet>, double);
template struct JepaModel<float>;
template struct JepaModel<double>;

}  // namespace scott
