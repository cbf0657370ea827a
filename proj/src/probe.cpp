#include "scott/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "scott/errors.hpp"
#include "scott/ops.hpp"
#include "scott/optim.hpp"

namespace scott {

template <Real T>
LinearProbe<T>::LinearProbe(std::int64_t dim, std::int64_t classes, Rng& rng) : norm(dim), head(dim, classes, rng) {}

template <Real T>
Tensor<T> LinearProbe<T>::operator()(const Tensor<T>& features) const {
  return head(norm(ops::mean_axis(features, 1)));
}

template <Real T>
void LinearProbe<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  norm.collect(prefix + "norm.", out);
  head.collect(prefix + "head.", out);
}

template <Real T>
AttentiveProbe<T>::AttentiveProbe(std::int64_t dim, std::int64_t classes, std::int64_t heads_, Rng& rng)
    : query(init_trunc_normal<T>({dim}, 0.02, rng)),
      q(dim, dim, rng),
      k(dim, dim, rng),
      v(dim, dim, rng),
      proj(dim, dim, rng),
      ffn(dim, static_cast<std::int64_t>(std::llround(8.0 * static_cast<double>(dim) / 3.0)), rng),
      norm(dim),
      head(dim, classes, rng),
      heads(heads_) {
  if (dim % heads_ != 0) throw ConfigError("probe heads must divide the feature width", "probe.heads");
}

template <Real T>
Tensor<T> AttentiveProbe<T>::attend(const Tensor<T>& features) const {
  const auto B = features.dim(0), d = features.dim(2);
  std::vector<Tensor<T>> rows(static_cast<std::size_t>(B), ops::reshape(query, {1, 1, d}));
  auto qb = ops::concat(rows, 0);
  return ops::attention(q(qb), k(features), v(features), heads);
}

template <Real T>
Tensor<T> AttentiveProbe<T>::operator()(const Tensor<T>& features) const {
  const auto B = features.dim(0), d = features.dim(2);
  auto x = ops::add(proj(attend(features)), query);  // residual onto the query
  x = ffn(x);
  return head(ops::reshape(norm(x), {B, d}));
}

template <Real T>
void AttentiveProbe<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "query", query);
  q.collect(prefix + "attn.q.", out);
  k.collect(prefix + "attn.k.", out);
  v.collect(prefix + "attn.v.", out);
  proj.collect(prefix + "attn.proj.", out);
  ffn.collect(prefix + "ffn.", out);
  norm.collect(prefix + "norm.", out);
  head.collect(prefix + "head.", out);
}

Probe::Probe(ProbeKind kind, std::int64_t dim, std::int64_t classes, std::int64_t heads, Rng& rng)
    : kind_(kind), classes_(classes) {
  if (classes < 2) throw ConfigError("a probe needs at least 2 classes", "probe.classes");
  if (kind == ProbeKind::kLinear) {
    linear_ = LinearProbe<float>(dim, classes, rng);
  } else {
    attentive_ = AttentiveProbe<float>(dim, classes, heads, rng);
  }
}

Tensor<float> Probe::operator()(const Tensor<float>& features) const {
  return kind_ == ProbeKind::kLinear ? linear_(features) : attentive_(features);
}

NamedTensors<float> Probe::parameters() const {
  NamedTensors<float> out;
  if (kind_ == ProbeKind::kLinear) {
    linear_.collect("", out);
  } else {
    attentive_.collect("", out);
  }
  return out;
}

double topk_accuracy(const Tensor<float>& logits, std::span<const std::int64_t> labels, std::int64_t k) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(labels.size()))
    throw DimensionError("topk_accuracy expects logits[B x C] and B labels");
  const auto B = logits.dim(0), C = logits.dim(1);
  if (B == 0) throw ContractError("accuracy of an empty set");
  const auto x = logits.data();
  std::int64_t hits = 0;
  for (std::int64_t b = 0; b < B; ++b) {
    const float* row = x.data() + b * C;
    const auto lbl = labels[static_cast<std::size_t>(b)];
    std::int64_t rank = 0;
    for (std::int64_t c = 0; c < C; ++c)
      if (row[c] > row[lbl] || (row[c] == row[lbl] && c < lbl)) ++rank;
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(B);
}

Tensor<float> encode_frozen(const VisionEncoder<float>& encoder, std::span<const Image> images, std::int64_t batch) {
  NoGrad guard;
  std::vector<Tensor<float>> parts;
  for (std::size_t i = 0; i < images.size(); i += static_cast<std::size_t>(batch)) {
    const auto n = std::min(images.size() - i, static_cast<std::size_t>(batch));
    parts.push_back(encoder(batch_tensor<float>(images.subspan(i, n))));
  }
  if (parts.size() == 1) return parts[0];
  return ops::concat(parts, 0);
}

Image eval_preprocess(const Image& img, std::int64_t size, const AugmentConfig& aug) {
  return normalize(resize_center_crop(img, size), aug);
}

namespace {

std::vector<std::int64_t> labels_of(const Dataset& data) {
  std::vector<std::int64_t> out;
  for (const auto& s : data.samples) {
    if (s.label < 0) throw DataError("sample '" + s.name + "' has no label");
    out.push_back(s.label);
  }
  return out;
}

}  // namespace

Probe train_probe(const VisionEncoder<float>& encoder, const Dataset& train, const TrainConfig& cfg, std::uint64_t seed,
                  const std::function<void(const ProbeEpoch&)>& on_epoch) {
  if (train.empty()) throw DataError("probe training set is empty");
  const auto classes = std::max<std::int64_t>(train.num_classes(), 2);
  Rng init = Rng::derive(seed, {0x9b0eull});
  Probe probe(cfg.probe.kind, cfg.encoder.backbone.dim, classes, cfg.probe.heads, init);
  auto params = probe.parameters();
  AdamW<float> opt(params, cfg.adamw);
  const auto labels = labels_of(train);
  const auto n = static_cast<std::int64_t>(train.size());
  const auto B = cfg.probe.batch;
  const auto spe = (n + B - 1) / B;
  const auto total = cfg.probe.epochs * spe;

  // Without augmentation the frozen features never change: encode once.
  Tensor<float> cached;
  if (!cfg.probe.augment) {
    std::vector<Image> imgs;
    for (const auto& s : train.samples) imgs.push_back(eval_preprocess(s.image, cfg.image_size, cfg.augment));
    cached = encode_frozen(encoder, imgs, B);
  }
  AugmentConfig geo = cfg.augment;

  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < cfg.probe.epochs; ++epoch) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuf = Rng::derive(seed, {0x5b0full, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuf.randint(0, static_cast<std::int64_t>(i) - 1))]);
    double loss_sum = 0.0, hit_sum = 0.0;
    for (std::int64_t s = 0; s < spe; ++s, ++step) {
      const auto lo = s * B, hi = std::min(n, lo + B);
      std::vector<std::int64_t> idx(order.begin() + lo, order.begin() + hi), ybatch;
      for (auto i : idx) ybatch.push_back(labels[static_cast<std::size_t>(i)]);
      Tensor<float> feats;
      if (cfg.probe.augment) {
        std::vector<Image> imgs(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
          Rng r = Rng::derive(seed, {0xa0a0ull, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx[j])});
          Image im = random_resized_crop(train.samples[static_cast<std::size_t>(idx[j])].image, cfg.image_size, geo, r);
          if (r.bernoulli(geo.hflip_p)) im = hflip(im);
          imgs[j] = normalize(im, geo);
        }
        feats = encode_frozen(encoder, imgs, B);
      } else {
        feats = ops::gather_rows(cached, idx);
      }
      const double t = static_cast<double>(step) / static_cast<double>(total);
      const double lr = 0.5 * cfg.probe.lr * (1.0 + std::cos(std::numbers::pi * t));
      Tape<float> tape;
      auto logits = probe(feats);
      auto loss = ops::cross_entropy(logits, ybatch);
      loss_sum += loss.item() * static_cast<double>(idx.size());
      hit_sum += topk_accuracy(logits.detach(), ybatch, 1) * static_cast<double>(idx.size());
      tape.backward(loss);
      opt.step(lr, cfg.probe.wd);
      for (auto& [name, p] : params) p.clear_grad();
    }
    if (on_epoch) on_epoch({epoch, loss_sum / static_cast<double>(n), hit_sum / static_cast<double>(n)});
  }
  return probe;
}

EvalResult evaluate(const VisionEncoder<float>& encoder, const Probe& probe, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw ContractError("evaluation dataset is empty");
  const auto labels = labels_of(data);
  for (auto l : labels)
    if (l >= probe.classes()) throw DataError("label " + std::to_string(l) + " exceeds the probe's class count");
  std::vector<Image> imgs;
  for (const auto& s : data.samples) imgs.push_back(eval_preprocess(s.image, cfg.image_size, cfg.augment));
  Tensor<float> logits;
  {
    NoGrad guard;
    logits = probe(encode_frozen(encoder, imgs, cfg.probe.batch));
  }
  EvalResult r;
  r.count = static_cast<std::int64_t>(data.size());
  r.top1 = topk_accuracy(logits, labels, 1);
  r.top5 = topk_accuracy(logits, labels, 5);
  return r;
}

Checkpoint probe_checkpoint(const Probe& probe, const TrainConfig& cfg, const std::string& backbone_digest) {
  Checkpoint ck;
  ck.config_text = cfg.to_text();
  ck.meta["kind"] = "probe";
  ck.meta["probe_kind"] = to_string(probe.kind());
  ck.meta["classes"] = std::to_string(probe.classes());
  ck.meta["backbone_digest"] = backbone_digest;
  ck.add_group("probe.", probe.parameters());
  return ck;
}

Probe load_probe(const Checkpoint& ckpt, std::int64_t dim) {
  if (ckpt.meta.count("kind") == 0 || ckpt.meta.at("kind") != "probe") throw CheckpointError("not a probe checkpoint");
  TrainConfig cfg;
  try {
    cfg = parse_config_text(ckpt.config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("embedded config is invalid: ") + e.what());
  }
  ProbeKind kind;
  try {
    kind = parse_probe_kind(ckpt.meta_value("probe_kind"));
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  Rng rng(0);
  Probe p(kind, dim, std::stoll(ckpt.meta_value("classes")), cfg.probe.heads, rng);
  auto dst = p.parameters();
  try {
    copy_parameters(ckpt.group("probe."), dst);
  } catch (const StateError& e) {
    throw CheckpointError(std::string("probe checkpoint does not match: ") + e.what());
  }
  return p;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

template struct LinearProbe<float>;
template struct LinearProbe<double>;
template struct AttentiveProbe<float>;
template struct AttentiveProbe<double>;

}  // namespace scott
