#include "scott/transformer.hpp"

#include <cmath>

#include "scott/ops.hpp"

namespace scott {

std::int64_t BackboneConfig::hidden() const {
  if (ffn_hidden > 0) return ffn_hidden;
  return static_cast<std::int64_t>(std::llround(8.0 * static_cast<double>(dim) / 3.0));
}

void BackboneConfig::validate() const {
  if (dim < 1 || blocks < 0 || heads < 1) throw ConfigError("backbone sizes must be positive", "model.dim");
  if (dim % heads != 0) throw ConfigError("model.dim must be divisible by model.heads", "model.heads");
  if (dim % 4 != 0) throw ConfigError("model.dim must be divisible by 4 for 2-D positions", "model.dim");
}

void PredictorConfig::validate() const {
  if (dim < 1 || blocks < 0 || heads < 1) throw ConfigError("predictor sizes must be positive", "predictor.dim");
  if (dim % heads != 0) throw ConfigError("predictor.dim must be divisible by predictor.heads", "predictor.heads");
}

template <Real T>
Tensor<T> sinusoidal_positions(std::int64_t grid_h, std::int64_t grid_w, std::int64_t dim) {
  if (dim % 4 != 0 || dim < 4) throw ConfigError("positional width must be a positive multiple of 4");
  const auto nf = dim / 4;
  std::vector<T> table(static_cast<std::size_t>(grid_h * grid_w * dim));
  for (std::int64_t r = 0; r < grid_h; ++r)
    for (std::int64_t c = 0; c < grid_w; ++c) {
      T* row = table.data() + (r * grid_w + c) * dim;
      for (std::int64_t k = 0; k < nf; ++k) {
        const double omega = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(nf));
        const double ax = static_cast<double>(c) * omega;
        const double ay = static_cast<double>(r) * omega;
        row[k] = static_cast<T>(std::sin(ax));
        row[nf + k] = static_cast<T>(std::cos(ax));
        row[2 * nf + k] = static_cast<T>(std::sin(ay));
        row[3 * nf + k] = static_cast<T>(std::cos(ay));
      }
    }
  return Tensor<T>({grid_h * grid_w, dim}, std::move(table));
}

template <Real T>
Tensor<T> substitute_mask_tokens(const Tensor<T>& tokens, std::span<const std::uint8_t> active,
                                 const Tensor<T>& mask_token) {
  return ops::substitute_rows(tokens, active, mask_token);
}

template <Real T>
Linear<T>::Linear(std::int64_t in, std::int64_t out, Rng& rng, double stddev)
    : weight(init_trunc_normal<T>({in, out}, stddev, rng)), bias(init_constant<T>({out}, T(0))) {}

template <Real T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  return ops::linear(x, weight, bias);
}

template <Real T>
void Linear<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "weight", weight);
  out.emplace_back(prefix + "bias", bias);
}

template <Real T>
LayerNorm<T>::LayerNorm(std::int64_t dim) : gamma(init_constant<T>({dim}, T(1))), beta(init_constant<T>({dim}, T(0))) {}

template <Real T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return ops::layer_norm(x, gamma, beta, T(1e-6));
}

template <Real T>
void LayerNorm<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "gamma", gamma);
  out.emplace_back(prefix + "beta", beta);
}

template <Real T>
SwiGLU<T>::SwiGLU(std::int64_t dim, std::int64_t hidden, Rng& rng)
    : w1(dim, hidden, rng), w2(dim, hidden, rng), w3(hidden, dim, rng) {}

template <Real T>
Tensor<T> SwiGLU<T>::operator()(const Tensor<T>& x) const {
  return w3(ops::mul(ops::silu(w1(x)), w2(x)));
}

template <Real T>
void SwiGLU<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  w1.collect(prefix + "w1.", out);
  w2.collect(prefix + "w2.", out);
  w3.collect(prefix + "w3.", out);
}

template <Real T>
Block<T>::Block(std::int64_t dim, std::int64_t heads_, std::int64_t hidden, Rng& rng)
    : norm1(dim), norm2(dim), qkv(dim, 3 * dim, rng), proj(dim, dim, rng), ffn(dim, hidden, rng), heads(heads_) {}

template <Real T>
Tensor<T> Block<T>::operator()(const Tensor<T>& x) const {
  const auto d = x.dim(-1);
  auto h = qkv(norm1(x));
  auto q = ops::slice(h, -1, 0, d);
  auto k = ops::slice(h, -1, d, 2 * d);
  auto v = ops::slice(h, -1, 2 * d, 3 * d);
  auto y = ops::add(x, proj(ops::attention(q, k, v, heads)));
  return ops::add(y, ffn(norm2(y)));
}

template <Real T>
void Block<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  norm1.collect(prefix + "norm1.", out);
  qkv.collect(prefix + "attn.qkv.", out);
  proj.collect(prefix + "attn.proj.", out);
  norm2.collect(prefix + "norm2.", out);
  ffn.collect(prefix + "ffn.", out);
}

template <Real T>
TransformerStack<T>::TransformerStack(std::int64_t dim, std::int64_t depth, std::int64_t heads, std::int64_t hidden,
                                      Rng& rng)
    : norm(dim) {
  blocks.reserve(static_cast<std::size_t>(depth));
  for (std::int64_t i = 0; i < depth; ++i) blocks.emplace_back(dim, heads, hidden, rng);
}

template <Real T>
Tensor<T> TransformerStack<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& b : blocks) h = b(h);
  return norm(h);
}

template <Real T>
void TransformerStack<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + "blocks." + std::to_string(i) + ".", out);
  norm.collect(prefix + "norm.", out);
}

EncoderConfig EncoderConfig::scott7_16() {
  EncoderConfig c;
  c.backbone = BackboneConfig::scott7_16();
  c.stem.dim = c.backbone.dim;
  return c;
}

EncoderConfig EncoderConfig::scott12_16() {
  EncoderConfig c;
  c.backbone = BackboneConfig::scott12_16();
  c.stem.dim = c.backbone.dim;
  return c;
}

template <Real T>
VisionEncoder<T>::VisionEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.backbone.validate();
  if (cfg.stem.dim != cfg.backbone.dim) throw ConfigError("stem output width must equal model.dim", "model.dim");
  tokenizer = Tokenizer<T>(cfg.tokenizer, cfg.stem, rng);
  mask_token = init_trunc_normal<T>({cfg.backbone.dim}, 0.02, rng);
  stack = TransformerStack<T>(cfg.backbone.dim, cfg.backbone.blocks, cfg.backbone.heads, cfg.backbone.hidden(), rng);
}

template <Real T>
Tensor<T> VisionEncoder<T>::encode_tokens(const TokenGrid<T>& grid) const {
  auto x = substitute_mask_tokens(grid.tokens, grid.active, mask_token);
  x = ops::add(x, sinusoidal_positions<T>(grid.grid_h, grid.grid_w, cfg_.backbone.dim));
  return stack(x);
}

template <Real T>
Tensor<T> VisionEncoder<T>::operator()(const Tensor<T>& images_nhwc, std::span<const MaskSet> masks) const {
  return encode_tokens(tokenizer(images_nhwc, masks));
}

template <Real T>
NamedTensors<T> VisionEncoder<T>::parameters() const {
  NamedTensors<T> out;
  tokenizer.collect("", out);
  out.emplace_back("mask_token", mask_token);
  stack.collect("", out);
  return out;
}

template <Real T>
Predictor<T>::Predictor(std::int64_t encoder_dim, const PredictorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  project_ = encoder_dim != cfg.dim;
  if (project_) {
    embed = Linear<T>(encoder_dim, cfg.dim, rng);
    unembed = Linear<T>(cfg.dim, encoder_dim, rng);
  }
  const auto hidden = cfg.ffn_hidden > 0 ? cfg.ffn_hidden
                                         : static_cast<std::int64_t>(std::llround(8.0 * static_cast<double>(cfg.dim) / 3.0));
  stack = TransformerStack<T>(cfg.dim, cfg.blocks, cfg.heads, hidden, rng);
}

template <Real T>
Tensor<T> Predictor<T>::operator()(const Tensor<T>& context) const {
  if (!project_) return stack(context);
  return unembed(stack(embed(context)));
}

template <Real T>
NamedTensors<T> Predictor<T>::parameters() const {
  NamedTensors<T> out;
  if (project_) embed.collect("embed.", out);
  stack.collect("", out);
  if (project_) unembed.collect("unembed.", out);
  return out;
}

std::int64_t encoder_parameter_count(const EncoderConfig& cfg) {
  const auto d = cfg.backbone.dim;
  const auto h = cfg.backbone.hidden();
  const std::int64_t tok = cfg.tokenizer == TokenizerKind::kScott
                               ? stem_parameter_count(cfg.stem)
                               : StemConfig::kPatch * StemConfig::kPatch * cfg.stem.in_channels * d + d;
  const std::int64_t attn = d * 3 * d + 3 * d + d * d + d;
  const std::int64_t norms = 4 * d;
  const std::int64_t ffn = 2 * (d * h + h) + h * d + d;
  return tok + d + cfg.backbone.blocks * (attn + norms + ffn) + 2 * d;
}

#define SCOTT_INSTANTIATE_TRANSFORMER(T)                                                                  \
  template Tensor<T> sinusoidal_positions<T>(std::int64_t, std::int64_t, std::int64_t);                   \
  template Tensor<T> substitute_mask_tokens(const Tensor<T>&, std::span<const std::uint8_t>, const Tensor<T>&); \
  template struct Linear<T>;                                                                              \
  template struct LayerNorm<T>;                                                                           \
  template struct SwiGLU<T>;                                                                              \
  template struct Block<T>;                                                                               \
  template struct TransformerStack<T>;                                                                    \
  template class VisionEncoder<T>;                                                                        \
  template class Predictor<T>;

SCOTT_INSTANTIATE_TRANSFORMER(float)
SCOTT_INSTANTIATE_TRANSFORMER(double)

}  // namespace scott
