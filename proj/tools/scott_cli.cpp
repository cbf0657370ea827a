// scott: pretrain, probe, evaluate and inspect SCOTT/MIM-JEPA models.
//
// Exit codes: 0 ok, 1 other failure, 2 configuration, 3 data, 4 checkpoint.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "scott/checkpoint.hpp"
#include "scott/config.hpp"
#include "scott/dataset.hpp"
#include "scott/errors.hpp"
#include "scott/ops.hpp"
#include "scott/pca.hpp"
#include "scott/probe.hpp"
#include "scott/threading.hpp"
#include "scott/trainer.hpp"

namespace fs = std::filesystem;
using namespace scott;
using json = nlohmann::json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Threads for tensor ops and the data pipeline")->capture_default_str()->check(
      CLI::PositiveNumber);
}

TrainConfig resolve_config(const std::string& path, const Common& c) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_config(path);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::int64_t count_dataset(const std::string& spec) {
  SynthSpec ss;
  if (parse_synth_spec(spec, ss)) return ss.n;
  if (!fs::is_directory(spec)) throw DataError("dataset directory '" + spec + "' does not exist");
  std::int64_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(spec)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM") ++n;
  }
  return n;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

// ---- pretrain -----------------------------------------------------------------

struct PretrainArgs {
  Common common;
  std::string config, data, resume;
  bool dry_run = false;
  std::int64_t stop_at = -1;
};

int cmd_pretrain(const PretrainArgs& a) {
  TrainConfig cfg;
  if (!a.resume.empty()) {
    TrainConfig stored;
    from_checkpoint(read_checkpoint(a.resume), stored);
    cfg = a.config.empty() ? stored : resolve_config(a.config, a.common);
    if (a.config.empty() && a.common.seed) cfg.seed = *a.common.seed;
  } else {
    cfg = resolve_config(a.config, a.common);
  }
  if (a.dry_run) {
    const auto n = count_dataset(a.data);
    const auto used = static_cast<std::int64_t>(std::ceil(cfg.data_fraction * static_cast<double>(n)));
    std::cout << cfg.to_text();
    std::cout << "# dataset images: " << used << "\n";
    std::cout << "# steps per epoch: " << cfg.steps_per_epoch(used) << "\n";
    std::cout << "# total steps: " << cfg.total_steps(used) << "\n";
    std::cout << "# config digest: " << hex64(cfg.digest()) << "\n";
    return 0;
  }
  auto data = take_fraction(load_dataset(a.data, cfg.seed), cfg.data_fraction, cfg.seed);
  PretrainOptions opts;
  opts.out_dir = a.common.out;
  if (!a.resume.empty()) opts.resume = a.resume;
  opts.stop_at = a.stop_at;
  const auto total = cfg.total_steps(static_cast<std::int64_t>(data.size()));
  opts.on_step = [total](const StepMetrics& m) {
    if (m.step % 10 == 0 || m.step + 1 == total) {
      std::fprintf(stderr, "step %lld/%lld  epoch %lld  loss %.6f  lr %.3g  target_std %.4f\n",
                   static_cast<long long>(m.step + 1), static_cast<long long>(total), static_cast<long long>(m.epoch),
                   m.loss, m.lr, m.target_std);
    }
  };
  fs::create_directories(opts.out_dir);
  auto res = pretrain(data, cfg, opts);
  json j = {{"steps_run", res.metrics.size()},
            {"total_steps", res.total_steps},
            {"checkpoint", res.last_checkpoint.string()},
            {"final_loss", res.metrics.empty() ? 0.0 : res.metrics.back().loss}};
  std::cout << j.dump() << "\n";
  return 0;
}

// ---- probe --------------------------------------------------------------------

struct ProbeArgs {
  Common common;
  std::string checkpoint, data, kind, encoder = "target", config;
  std::optional<std::int64_t> epochs;
};

int cmd_probe(const ProbeArgs& a) {
  const auto ckpt = read_checkpoint(a.checkpoint);
  TrainConfig cfg;
  auto enc = load_encoder(ckpt, cfg, a.encoder);
  if (!a.config.empty()) {
    // only probe.* keys are meaningful here; the backbone comes from the checkpoint
    const TrainConfig over = load_config(a.config, cfg);
    cfg.probe = over.probe;
  }
  if (!a.kind.empty()) cfg.probe.kind = parse_probe_kind(a.kind);
  if (a.epochs) cfg.probe.epochs = *a.epochs;
  if (a.common.seed) cfg.seed = *a.common.seed;
  cfg.validate();
  auto data = load_dataset(a.data, cfg.seed);
  auto probe = train_probe(enc, data, cfg, cfg.seed, [&](const ProbeEpoch& e) {
    std::fprintf(stderr, "probe epoch %lld  loss %.5f  train_top1 %s%%\n", static_cast<long long>(e.epoch + 1), e.loss,
                 pct(e.train_top1).c_str());
  });
  fs::create_directories(a.common.out);
  const auto path = fs::path(a.common.out) / "probe.ckpt";
  write_checkpoint(path, probe_checkpoint(probe, cfg, file_digest(a.checkpoint)));
  const auto r = evaluate(enc, probe, data, cfg);
  json j = {{"probe", path.string()}, {"kind", to_string(probe.kind())}, {"train_top1", r.top1}, {"train_top5", r.top5}};
  std::cout << j.dump() << "\n";
  return 0;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string checkpoint, probe, data, encoder = "target", results;
};

int cmd_eval(const EvalArgs& a) {
  const auto ckpt = read_checkpoint(a.checkpoint);
  TrainConfig cfg;
  auto enc = load_encoder(ckpt, cfg, a.encoder);
  const auto pck = read_checkpoint(a.probe);
  const auto probe = load_probe(pck, cfg.encoder.backbone.dim);
  if (a.common.seed) cfg.seed = *a.common.seed;
  auto data = load_dataset(a.data, cfg.seed);
  const auto r = evaluate(enc, probe, data, cfg);
  const auto digest = file_digest(a.checkpoint);
  json j = {{"dataset", a.data}, {"probe", to_string(probe.kind())}, {"top1", r.top1},
            {"top5", r.top5},    {"count", r.count},                 {"checkpoint_digest", digest}};
  std::cout << j.dump() << "\n";
  fs::create_directories(a.common.out);
  const auto csv = a.results.empty() ? fs::path(a.common.out) / "results.csv" : fs::path(a.results);
  const bool fresh = !fs::exists(csv);
  std::ofstream out(csv, std::ios::app);
  if (!out) throw DataError("cannot append to '" + csv.string() + "'");
  if (fresh) out << "dataset,probe,top1,top5,checkpoint_digest\n";
  out << a.data << ',' << to_string(probe.kind()) << ',' << r.top1 << ',' << r.top5 << ',' << digest << '\n';
  return 0;
}

// ---- features -----------------------------------------------------------------

struct FeaturesArgs {
  Common common;
  std::string checkpoint, images, encoder = "target";
  bool second_stage = false;
  double threshold = 0.0;
  std::int64_t group = 0;
};

int cmd_features(const FeaturesArgs& a) {
  const auto ckpt = read_checkpoint(a.checkpoint);
  TrainConfig cfg;
  auto enc = load_encoder(ckpt, cfg, a.encoder);
  if (a.common.seed) cfg.seed = *a.common.seed;
  SynthSpec ss;
  Dataset data = parse_synth_spec(a.images, ss) ? load_dataset(a.images, cfg.seed) : load_image_list(a.images);
  const auto size = cfg.image_size;
  const auto g = size / StemConfig::kPatch;
  const auto n = g * g;
  std::vector<Image> imgs;
  for (const auto& s : data.samples) imgs.push_back(eval_preprocess(s.image, size, cfg.augment));
  const auto feats = encode_frozen(enc, imgs, cfg.probe.batch);
  const auto d = feats.dim(2);
  fs::create_directories(a.common.out);

  const auto total = static_cast<std::int64_t>(data.size());
  const auto group = a.group > 0 ? a.group : total;
  std::int64_t tp = 0, fn = 0, fg_total = 0;
  bool have_truth = false;
  json groups = json::array();
  for (std::int64_t g0 = 0; g0 < total; g0 += group) {
    const auto gn = std::min(group, total - g0);
    FeatureMatrix fm;
    fm.dim = d;
    std::vector<std::string> names;
    for (std::int64_t i = 0; i < gn; ++i) {
      names.push_back(fs::path(data.samples[static_cast<std::size_t>(g0 + i)].name).stem().string());
      for (std::int64_t p = 0; p < n; ++p) {
        fm.provenance.emplace_back(i, p);
        const auto base = ((g0 + i) * n + p) * d;
        for (std::int64_t j = 0; j < d; ++j) fm.rows.push_back(feats[static_cast<std::size_t>(base + j)]);
      }
    }
    auto fa = analyze_features(fm, gn, g, g, StemConfig::kPatch, a.second_stage, a.threshold);
    for (std::int64_t i = 0; i < gn; ++i) save_png(fs::path(a.common.out) / (names[static_cast<std::size_t>(i)] + "_pca.png"), fa.renders[static_cast<std::size_t>(i)]);
    const auto csv_name = total == group ? std::string("projections.csv") : "projections_" + std::to_string(g0 / group) + ".csv";
    write_projections_csv(fs::path(a.common.out) / csv_name, fm, fa, g, names);
    for (auto f : fa.foreground) fg_total += f;
    for (std::int64_t i = 0; i < gn; ++i) {
      const auto& s = data.samples[static_cast<std::size_t>(g0 + i)];
      if (s.foreground.empty()) continue;
      have_truth = true;
      Image mask(s.image.height, s.image.width);
      for (std::size_t px = 0; px < s.foreground.size(); ++px)
        for (int c = 0; c < 3; ++c) mask.pixels[px * 3 + static_cast<std::size_t>(c)] = s.foreground[px];
      const auto m = resize_center_crop(mask, size);
      for (std::int64_t p = 0; p < n; ++p) {
        double cover = 0.0;
        const auto py = p / g, px = p % g;
        for (std::int64_t y = 0; y < 16; ++y)
          for (std::int64_t x = 0; x < 16; ++x) cover += m.at(py * 16 + y, px * 16 + x, 0);
        if (cover / 256.0 < 0.5) continue;
        if (fa.foreground[static_cast<std::size_t>(i * n + p)]) {
          ++tp;
        } else {
          ++fn;
        }
      }
    }
    groups.push_back({{"images", gn}, {"explained_variance", fa.first.explained_variance}});
  }
  json j = {{"images", total},
            {"patches", total * n},
            {"foreground_fraction", static_cast<double>(fg_total) / static_cast<double>(total * n)},
            {"groups", groups},
            {"out", a.common.out}};
  if (have_truth && tp + fn > 0) j["foreground_recall"] = static_cast<double>(tp) / static_cast<double>(tp + fn);
  std::cout << j.dump() << "\n";
  return 0;
}

// ---- inspect ------------------------------------------------------------------

struct InspectArgs {
  Common common;
  std::string checkpoint, config;
  int schedule_rows = 11;
};

std::map<std::string, std::int64_t> breakdown(const NamedTensors<float>& params) {
  std::map<std::string, std::int64_t> out;
  for (const auto& [name, t] : params) {
    std::string key = name.substr(0, name.find('.'));
    if (key == "blocks") {
      const auto second = name.find('.', 7);
      key = name.substr(0, second);
    }
    out[key] += t.numel();
  }
  return out;
}

void print_model(const std::string& title, const EncoderConfig& ec) {
  Rng rng(0);
  VisionEncoder<float> enc(ec, rng);
  const auto params = enc.parameters();
  std::printf("%s (d=%lld, blocks=%lld, heads=%lld, tokenizer=%s)\n", title.c_str(),
              static_cast<long long>(ec.backbone.dim), static_cast<long long>(ec.backbone.blocks),
              static_cast<long long>(ec.backbone.heads), to_string(ec.tokenizer).c_str());
  for (const auto& [k, v] : breakdown(params)) std::printf("  %-16s %12lld\n", k.c_str(), static_cast<long long>(v));
  const auto total = count_parameters(params);
  std::printf("  %-16s %12lld  (%.2f M)\n", "total", static_cast<long long>(total), static_cast<double>(total) / 1e6);
}

void print_schedule(const TrainConfig& cfg, int rows) {
  std::printf("schedule over %g epochs (warmup %g, flat fraction %g)\n", cfg.schedule.epochs, cfg.schedule.warmup_epochs,
              cfg.schedule.flat_fraction);
  std::printf("  %8s %8s %12s %8s %8s\n", "t", "epoch", "lr", "wd", "ema");
  std::vector<double> ts;
  for (int i = 0; i < rows; ++i) ts.push_back(static_cast<double>(i) / (rows - 1));
  ts.push_back(cfg.schedule.warmup_end());
  ts.push_back(cfg.schedule.flat_end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  for (double t : ts)
    std::printf("  %8.4f %8.2f %12.6g %8.4f %8.5f\n", t, t * cfg.schedule.epochs, lr_at(t, cfg.schedule),
                wd_at(t, cfg.schedule), ema_at(t, cfg.schedule));
}

int cmd_inspect(const InspectArgs& a) {
  TrainConfig cfg = resolve_config(a.config, a.common);
  if (!a.checkpoint.empty()) {
    const auto ckpt = read_checkpoint(a.checkpoint);
    try {
      cfg = parse_config_text(ckpt.config_text);
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("embedded config is invalid: ") + e.what());
    }
    std::printf("checkpoint %s\n  config digest %s\n", a.checkpoint.c_str(), hex64(ckpt.config_digest()).c_str());
    for (const auto& [k, v] : ckpt.meta)
      if (k != "mask_rng") std::printf("  %s = %s\n", k.c_str(), v.c_str());
    std::map<std::string, std::int64_t> groups;
    for (const auto& [name, t] : ckpt.tensors) groups[name.substr(0, name.find('.'))] += t.numel();
    for (const auto& [k, v] : groups) std::printf("  %-16s %12lld\n", k.c_str(), static_cast<long long>(v));
    const auto ctx = ckpt.group("context.");
    if (!ctx.empty()) {
      std::printf("context encoder breakdown\n");
      for (const auto& [k, v] : breakdown(ctx)) std::printf("  %-16s %12lld\n", k.c_str(), static_cast<long long>(v));
    }
    std::printf("\n");
  }
  print_model("SCOTT-7/16", EncoderConfig::scott7_16());
  print_model("SCOTT-12/16", EncoderConfig::scott12_16());
  print_model("configured encoder", cfg.encoder);
  std::printf("\n");
  print_schedule(cfg, a.schedule_rows);
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const GeometryError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCOTT tokenizer + MIM-JEPA pretraining, probing and feature analysis"};
  app.require_subcommand(1);

  PretrainArgs pa;
  auto* pre = app.add_subcommand("pretrain", "Self-supervised MIM-JEPA pretraining");
  add_common(pre, pa.common);
  pre->add_option("--config", pa.config, "key=value config file (defaults apply to missing keys)");
  pre->add_option("--data", pa.data, "Class-folder root or synth:<n>x<classes>x<size>")->required();
  pre->add_option("--resume", pa.resume, "Continue from a checkpoint");
  pre->add_flag("--dry-run", pa.dry_run, "Print the resolved config and step count, write nothing");
  pre->add_option("--stop-at", pa.stop_at, "Stop after this many global steps (for partial runs)");

  ProbeArgs pr;
  auto* probe = app.add_subcommand("probe", "Train a linear or attentive probe on frozen features");
  add_common(probe, pr.common);
  probe->add_option("--checkpoint", pr.checkpoint, "Pretraining checkpoint")->required();
  probe->add_option("--data", pr.data, "Labeled training data")->required();
  probe->add_option("--kind", pr.kind, "linear | attentive (default from config)");
  probe->add_option("--epochs", pr.epochs, "Probe epochs (default from config)");
  probe->add_option("--encoder", pr.encoder, "target | context")->capture_default_str();
  probe->add_option("--config", pr.config, "Config file whose probe.* keys override the checkpoint's");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Top-1/Top-5 of a trained probe; JSON on stdout");
  add_common(eval, ev.common);
  eval->add_option("--checkpoint", ev.checkpoint, "Pretraining checkpoint")->required();
  eval->add_option("--probe", ev.probe, "Probe checkpoint")->required();
  eval->add_option("--data", ev.data, "Labeled evaluation data")->required();
  eval->add_option("--encoder", ev.encoder, "target | context")->capture_default_str();
  eval->add_option("--results", ev.results, "Results CSV to append to (default <out>/results.csv)");

  FeaturesArgs fe;
  auto* feat = app.add_subcommand("features", "PCA of patch features, foreground split and RGB renders");
  add_common(feat, fe.common);
  feat->add_option("--checkpoint", fe.checkpoint, "Pretraining checkpoint")->required();
  feat->add_option("--images", fe.images, "Directory of images or synth:<n>x<classes>x<size>")->required();
  feat->add_flag("--second-stage", fe.second_stage, "Second PCA over foreground patches");
  feat->add_option("--threshold", fe.threshold, "Foreground threshold on the first component")->capture_default_str();
  feat->add_option("--group", fe.group, "Images per PCA group (0 = all images together)")->capture_default_str();
  feat->add_option("--encoder", fe.encoder, "target | context")->capture_default_str();

  InspectArgs in;
  auto* insp = app.add_subcommand("inspect", "Parameter counts and schedule tables");
  add_common(insp, in.common);
  insp->add_option("--checkpoint", in.checkpoint, "Checkpoint to describe");
  insp->add_option("--config", in.config, "Config whose schedule to tabulate");
  insp->add_option("--rows", in.schedule_rows, "Schedule table rows")->capture_default_str()->check(CLI::Range(2, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto run = [&](const Common& c, auto&& fn) {
    set_num_threads(c.threads);
    return guarded(fn);
  };
  if (*pre) return run(pa.common, [&] { return cmd_pretrain(pa); });
  if (*probe) return run(pr.common, [&] { return cmd_probe(pr); });
  if (*eval) return run(ev.common, [&] { return cmd_eval(ev); });
  if (*feat) return run(fe.common, [&] { return cmd_features(fe); });
  if (*insp) return run(in.common, [&] { return cmd_inspect(in); });
  return 1;
}
