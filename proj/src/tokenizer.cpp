#include "scott/tokenizer.hpp"

#include "scott/ops.hpp"

namespace scott {

void StemConfig::validate() const {
  if (in_channels < 1 || hidden < 1 || dim < 1) throw ConfigError("stem channel counts must be positive");
  if (kernel % 2 == 0) throw ConfigError("stem kernel must be odd");
  if (stride != 2) throw ConfigError("stem convolutions use stride 2 (total stride 16)");
}

std::int64_t stem_parameter_count(const StemConfig& c) {
  return c.in_channels * c.hidden * c.kernel * c.kernel + c.hidden + c.hidden * c.dim * c.kernel * c.kernel +
         c.dim;
}

template <Real T>
ScottStem<T>::ScottStem(const StemConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  const auto k2 = cfg.kernel * cfg.kernel;
  const auto fan1 = cfg.in_channels * k2;
  const auto fan2 = cfg.hidden * k2;
  conv1_weight = init_fan_in_uniform<T>({cfg.hidden, cfg.in_channels, cfg.kernel, cfg.kernel}, fan1, rng);
  conv1_bias = init_fan_in_uniform<T>({cfg.hidden}, fan1, rng);
  conv2_weight = init_fan_in_uniform<T>({cfg.dim, cfg.hidden, cfg.kernel, cfg.kernel}, fan2, rng);
  conv2_bias = init_fan_in_uniform<T>({cfg.dim}, fan2, rng);
}

template <Real T>
MaskedFeatureMap<T> ScottStem<T>::forward(const MaskedFeatureMap<T>& x) const {
  auto h = sparse_conv2d(x, conv1_weight, conv1_bias, cfg_.stride, cfg_.padding);
  h = sparse_relu(h);
  h = sparse_max_blur_pool(h, 3, 2);
  h = sparse_conv2d(h, conv2_weight, conv2_bias, cfg_.stride, cfg_.padding);
  h = sparse_relu(h);
  return sparse_max_blur_pool(h, 3, 2);
}

template <Real T>
TokenGrid<T> ScottStem<T>::tokenize(const MaskedFeatureMap<T>& image) const {
  const auto H = image.height(), W = image.width();
  if (H % StemConfig::kPatch != 0 || W % StemConfig::kPatch != 0) {
    throw GeometryError("stem input " + std::to_string(H) + "x" + std::to_string(W) + " is not a multiple of 16");
  }
  auto out = forward(image);
  TokenGrid<T> grid;
  grid.grid_h = out.height();
  grid.grid_w = out.width();
  grid.tokens = ops::reshape(out.features, {out.batch(), grid.grid_h * grid.grid_w, out.channels()});
  grid.active = std::move(out.active.cells);
  return grid;
}

template <Real T>
void ScottStem<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "conv1.weight", conv1_weight);
  out.emplace_back(prefix + "conv1.bias", conv1_bias);
  out.emplace_back(prefix + "conv2.weight", conv2_weight);
  out.emplace_back(prefix + "conv2.bias", conv2_bias);
}

template <Real T>
Tensor<T> patchify(const Tensor<T>& images_nhwc, std::int64_t patch) {
  if (images_nhwc.rank() != 4) throw DimensionError("images must be [B x H x W x C]");
  const auto B = images_nhwc.dim(0), H = images_nhwc.dim(1), W = images_nhwc.dim(2), C = images_nhwc.dim(3);
  if (patch < 1 || H % patch != 0 || W % patch != 0) {
    throw GeometryError("image " + std::to_string(H) + "x" + std::to_string(W) + " is not divisible into " +
                        std::to_string(patch) + "-pixel patches");
  }
  const auto gh = H / patch, gw = W / patch;
  auto x = ops::reshape(images_nhwc, {B, gh, patch, gw, patch, C});
  x = ops::permute(x, {0, 1, 3, 2, 4, 5});
  return ops::reshape(x, {B, gh * gw, patch * patch * C});
}

template <Real T>
PatchEmbed<T>::PatchEmbed(std::int64_t in_channels, std::int64_t patch, std::int64_t dim, Rng& rng)
    : patch_(patch) {
  const auto fan = patch * patch * in_channels;
  weight = init_fan_in_uniform<T>({fan, dim}, fan, rng);
  bias = init_fan_in_uniform<T>({dim}, fan, rng);
}

template <Real T>
Tensor<T> PatchEmbed<T>::forward(const Tensor<T>& images_nhwc) const {
  return ops::linear(patchify(images_nhwc, patch_), weight, bias);
}

template <Real T>
void PatchEmbed<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "proj.weight", weight);
  out.emplace_back(prefix + "proj.bias", bias);
}

TokenizerKind parse_tokenizer_kind(const std::string& name) {
  if (name == "scott") return TokenizerKind::kScott;
  if (name == "patch_embed") return TokenizerKind::kPatchEmbed;
  throw ConfigError("unknown tokenizer '" + name + "'", "model.tokenizer");
}

std::string to_string(TokenizerKind kind) {
  return kind == TokenizerKind::kScott ? "scott" : "patch_embed";
}

template <Real T>
Tokenizer<T>::Tokenizer(TokenizerKind kind, const StemConfig& cfg, Rng& rng) : kind_(kind) {
  if (kind == TokenizerKind::kScott) {
    stem_ = ScottStem<T>(cfg, rng);
  } else {
    embed_ = PatchEmbed<T>(cfg.in_channels, StemConfig::kPatch, cfg.dim, rng);
  }
}

template <Real T>
TokenGrid<T> Tokenizer<T>::operator()(const Tensor<T>& images_nhwc, std::span<const MaskSet> masks) const {
  const auto B = images_nhwc.dim(0), H = images_nhwc.dim(1), W = images_nhwc.dim(2);
  if (H % StemConfig::kPatch != 0 || W % StemConfig::kPatch != 0) {
    throw GeometryError("input " + std::to_string(H) + "x" + std::to_string(W) + " is not a multiple of 16");
  }
  const auto gh = H / StemConfig::kPatch, gw = W / StemConfig::kPatch;
  std::vector<MaskSet> empty;
  if (masks.empty()) {
    empty.assign(static_cast<std::size_t>(B), MaskSet::none(gh, gw));
    masks = empty;
  }
  if (kind_ == TokenizerKind::kScott) {
    return stem_.tokenize(mask_to_pixel_holes(images_nhwc, masks, StemConfig::kPatch));
  }
  if (static_cast<std::int64_t>(masks.size()) != B) throw DimensionError("one MaskSet per image required");
  TokenGrid<T> grid;
  grid.grid_h = gh;
  grid.grid_w = gw;
  grid.tokens = embed_.forward(images_nhwc);
  for (const auto& m : masks) {
    if (m.grid_h != gh || m.grid_w != gw) throw GeometryError("mask grid does not match the patch grid");
    const auto vis = m.visibility();
    grid.active.insert(grid.active.end(), vis.begin(), vis.end());
  }
  return grid;
}

template <Real T>
void Tokenizer<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  if (kind_ == TokenizerKind::kScott) {
    stem_.collect(prefix + "stem.", out);
  } else {
    embed_.collect(prefix + "patch_embed.", out);
  }
}

template class ScottStem<float>;
template class ScottStem<double>;
template class PatchEmbed<float>;
template class PatchEmbed<double>;
template class Tokenizer<float>;
template class Tokenizer<double>;
template Tensor<float> patchify(const Tensor<float>&, std::int64_t);
template Tensor<double> patchify(const Tensor<double>&, std::int64_t);

}  // namespace scott
