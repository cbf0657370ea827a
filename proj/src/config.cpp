#include "scott/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "scott/errors.hpp"

namespace scott {

ViewConsumption parse_view_consumption(const std::string& name) {
  if (name == "independent") return ViewConsumption::kIndependent;
  if (name == "paired") return ViewConsumption::kPaired;
  throw ConfigError("unknown view consumption '" + name + "'", "views.consumption");
}

std::string to_string(ViewConsumption c) { return c == ViewConsumption::kPaired ? "paired" : "independent"; }

ProbeKind parse_probe_kind(const std::string& name) {
  if (name == "linear") return ProbeKind::kLinear;
  if (name == "attentive") return ProbeKind::kAttentive;
  throw ConfigError("unknown probe kind '" + name + "'", "probe.kind");
}

std::string to_string(ProbeKind k) { return k == ProbeKind::kAttentive ? "attentive" : "linear"; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("value '" + s + "' for key '" + key + "' is not a number", key);
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& s) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("value '" + s + "' for key '" + key + "' is not an integer", key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("value '" + s + "' for key '" + key + "' is not a boolean", key);
}

template <typename Ref>
Field dbl(Ref ref) {
  return {[ref](TrainConfig& c, const std::string& v) { ref(c) = parse_double("", v); },
          [ref](const TrainConfig& c) { return fmt_double(ref(const_cast<TrainConfig&>(c))); }};
}

template <typename Ref>
Field int64(Ref ref) {
  return {[ref](TrainConfig& c, const std::string& v) { ref(c) = parse_int("", v); },
          [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); }};
}

template <typename Ref>
Field boolean(Ref ref) {
  return {[ref](TrainConfig& c, const std::string& v) { ref(c) = parse_bool("", v); },
          [ref](const TrainConfig& c) { return std::string(ref(const_cast<TrainConfig&>(c)) ? "true" : "false"); }};
}

template <typename Ref, typename Parse>
Field enumeration(Ref ref, Parse parse) {
  return {[ref, parse](TrainConfig& c, const std::string& v) { ref(c) = parse(v); },
          [ref](const TrainConfig& c) { return to_string(ref(const_cast<TrainConfig&>(c))); }};
}

template <typename Ref>
Field triple(Ref ref) {
  return {[ref](TrainConfig& c, const std::string& v) {
            std::array<double, 3> out{};
            std::stringstream ss(v);
            std::string item;
            int i = 0;
            while (std::getline(ss, item, ',')) {
              if (i == 3) throw ConfigError("expected three comma-separated values");
              out[static_cast<std::size_t>(i++)] = parse_double("", item);
            }
            if (i != 3) throw ConfigError("expected three comma-separated values");
            ref(c) = out;
          },
          [ref](const TrainConfig& c) {
            const auto& a = ref(const_cast<TrainConfig&>(c));
            return fmt_double(a[0]) + "," + fmt_double(a[1]) + "," + fmt_double(a[2]);
          }};
}

#define REF(expr) [](TrainConfig & c) -> auto& { return c.expr; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed", {[](TrainConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int("", v)); },
                [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      {"epochs", dbl(REF(schedule.epochs))},
      {"batch", int64(REF(batch))},
      {"image.size", int64(REF(image_size))},
      {"data.fraction", dbl(REF(data_fraction))},
      {"checkpoint.every", int64(REF(checkpoint_every))},
      {"model.tokenizer", enumeration(REF(encoder.tokenizer), parse_tokenizer_kind)},
      {"model.dim", {[](TrainConfig& c, const std::string& v) {
                       c.encoder.backbone.dim = parse_int("", v);
                       c.encoder.stem.dim = c.encoder.backbone.dim;
                     },
                     [](const TrainConfig& c) { return std::to_string(c.encoder.backbone.dim); }}},
      {"model.blocks", int64(REF(encoder.backbone.blocks))},
      {"model.heads", int64(REF(encoder.backbone.heads))},
      {"model.ffn_hidden", int64(REF(encoder.backbone.ffn_hidden))},
      {"stem.hidden", int64(REF(encoder.stem.hidden))},
      {"predictor.blocks", int64(REF(predictor.blocks))},
      {"predictor.dim", int64(REF(predictor.dim))},
      {"predictor.heads", int64(REF(predictor.heads))},
      {"predictor.ffn_hidden", int64(REF(predictor.ffn_hidden))},
      {"optim.lr_start", dbl(REF(schedule.lr_start))},
      {"optim.lr_peak", dbl(REF(schedule.lr_peak))},
      {"optim.lr_final", dbl(REF(schedule.lr_final))},
      {"optim.warmup_epochs", dbl(REF(schedule.warmup_epochs))},
      {"optim.flat_fraction", dbl(REF(schedule.flat_fraction))},
      {"optim.wd_start", dbl(REF(schedule.wd_start))},
      {"optim.wd_end", dbl(REF(schedule.wd_end))},
      {"optim.beta1", dbl(REF(adamw.beta1))},
      {"optim.beta2", dbl(REF(adamw.beta2))},
      {"optim.eps", dbl(REF(adamw.eps))},
      {"optim.decay_vectors", boolean(REF(adamw.decay_vectors))},
      {"ema.start", dbl(REF(schedule.ema_start))},
      {"ema.end", dbl(REF(schedule.ema_end))},
      {"loss.beta", dbl(REF(loss_beta))},
      {"mask.strategy", enumeration(REF(mask_strategy), parse_mask_strategy)},
      {"mask.ratio", dbl(REF(mask_ratio))},
      {"mask.min_block", int64(REF(blockwise.min_block))},
      {"mask.min_aspect", dbl(REF(blockwise.min_aspect))},
      {"views.strategy", enumeration(REF(augment.views), parse_view_strategy)},
      {"views.consumption", enumeration(REF(consumption), parse_view_consumption)},
      {"aug.crop_area_min", dbl(REF(augment.crop_area_min))},
      {"aug.crop_area_max", dbl(REF(augment.crop_area_max))},
      {"aug.aspect_min", dbl(REF(augment.aspect_min))},
      {"aug.aspect_max", dbl(REF(augment.aspect_max))},
      {"aug.hflip_p", dbl(REF(augment.hflip_p))},
      {"aug.jitter_p", dbl(REF(augment.jitter_p))},
      {"aug.brightness", dbl(REF(augment.brightness))},
      {"aug.contrast", dbl(REF(augment.contrast))},
      {"aug.saturation", dbl(REF(augment.saturation))},
      {"aug.hue", dbl(REF(augment.hue))},
      {"aug.grayscale_p", dbl(REF(augment.grayscale_p))},
      {"aug.blur_p", dbl(REF(augment.blur_p))},
      {"aug.blur_kernel", int64(REF(augment.blur_kernel))},
      {"aug.blur_sigma_min", dbl(REF(augment.blur_sigma_min))},
      {"aug.blur_sigma_max", dbl(REF(augment.blur_sigma_max))},
      {"norm.mean", triple(REF(augment.mean))},
      {"norm.std", triple(REF(augment.std))},
      {"probe.kind", enumeration(REF(probe.kind), parse_probe_kind)},
      {"probe.epochs", int64(REF(probe.epochs))},
      {"probe.batch", int64(REF(probe.batch))},
      {"probe.lr", dbl(REF(probe.lr))},
      {"probe.wd", dbl(REF(probe.wd))},
      {"probe.heads", int64(REF(probe.heads))},
      {"probe.augment", boolean(REF(probe.augment))},
  };
  return table;
}

#undef REF

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'", key);
  try {
    it->second.set(cfg, value);
  } catch (const ConfigError& e) {
    if (!e.key().empty() && e.key() != key) throw;
    throw ConfigError("invalid value '" + value + "' for key '" + key + "'", key);
  }
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'", key);
  return it->second.get(cfg);
}

TrainConfig parse_config_text(const std::string& text, const TrainConfig& base) {
  TrainConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'", line);
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'", "--config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), base);
}

std::int64_t TrainConfig::steps_per_epoch(std::int64_t dataset_size) const {
  return (dataset_size + batch - 1) / batch;
}

std::int64_t TrainConfig::total_steps(std::int64_t dataset_size) const {
  return static_cast<std::int64_t>(std::llround(schedule.epochs * static_cast<double>(steps_per_epoch(dataset_size))));
}

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("batch must be >= 1", "batch");
  if (image_size < 16 || image_size % 16 != 0) throw ConfigError("image.size must be a positive multiple of 16", "image.size");
  if (!(data_fraction > 0 && data_fraction <= 1)) throw ConfigError("data.fraction must be in (0,1]", "data.fraction");
  if (checkpoint_every < 1) throw ConfigError("checkpoint.every must be >= 1", "checkpoint.every");
  if (!(loss_beta > 0)) throw ConfigError("loss.beta must be positive", "loss.beta");
  if (!(mask_ratio > 0 && mask_ratio < 1)) throw ConfigError("mask.ratio must be in (0,1)", "mask.ratio");
  if (blockwise.min_block < 1) throw ConfigError("mask.min_block must be >= 1", "mask.min_block");
  if (!(blockwise.min_aspect > 0 && blockwise.min_aspect <= 1)) throw ConfigError("mask.min_aspect must be in (0,1]", "mask.min_aspect");
  if (encoder.stem.hidden < 1) throw ConfigError("stem.hidden must be >= 1", "stem.hidden");
  encoder.backbone.validate();
  predictor.validate();
  schedule.validate();
  augment.validate();
  if (!(adamw.beta1 >= 0 && adamw.beta1 < 1)) throw ConfigError("optim.beta1 must be in [0,1)", "optim.beta1");
  if (!(adamw.beta2 >= 0 && adamw.beta2 < 1)) throw ConfigError("optim.beta2 must be in [0,1)", "optim.beta2");
  if (!(adamw.eps > 0)) throw ConfigError("optim.eps must be positive", "optim.eps");
  if (probe.epochs < 1) throw ConfigError("probe.epochs must be >= 1", "probe.epochs");
  if (probe.batch < 1) throw ConfigError("probe.batch must be >= 1", "probe.batch");
  if (probe.heads < 1 || encoder.backbone.dim % probe.heads != 0)
    throw ConfigError("probe.heads must divide model.dim", "probe.heads");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + "=" + f.get(*this) + "\n";
  return out;
}

std::uint64_t TrainConfig::digest() const { return fnv1a64(to_text()); }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.image_size = 64;
  c.batch = 64;
  c.schedule.epochs = 25;
  c.schedule.warmup_epochs = 3;
  c.encoder.backbone = {192, 3, 3, 0};
  c.encoder.stem.dim = 192;
  c.predictor = {3, 192, 3, 0};
  c.blockwise.min_block = 4;
  c.augment.blur_kernel = 3;
  c.probe.epochs = 50;
  c.probe.heads = 3;
  return c;
}

}  // namespace scott
