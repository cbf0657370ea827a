#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scott/checkpoint.hpp"
#include "scott/config.hpp"
#include "scott/masking.hpp"
#include "scott/ops.hpp"
#include "scott/pca.hpp"
#include "scott/schedule.hpp"
#include "scott/sparse.hpp"
#include "scott/trainer.hpp"
#include "scott/transformer.hpp"

namespace py = pybind11;
using namespace scott;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<double>(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor<double>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

std::vector<MaskSet> masks_from(const std::vector<std::vector<std::int64_t>>& idx, std::int64_t gh, std::int64_t gw) {
  std::vector<MaskSet> out;
  for (const auto& m : idx) out.push_back(MaskSet::from_indices(gh, gw, m));
  return out;
}

py::tuple sparse_map_result(const MaskedFeatureMap<double>& m) {
  py::array_t<std::uint8_t> act({m.active.batch, m.active.height, m.active.width});
  std::copy(m.active.cells.begin(), m.active.cells.end(), act.mutable_data());
  return py::make_tuple(to_array(m.features), act);
}

MaskedFeatureMap<double> sparse_map_from(const Array& x, const std::vector<std::vector<std::int64_t>>& masked,
                                         std::int64_t patch) {
  auto t = to_tensor(x);
  if (masked.empty()) return dense_map(t);
  auto masks = masks_from(masked, t.dim(1) / patch, t.dim(2) / patch);
  return mask_to_pixel_holes(t, std::span<const MaskSet>(masks), patch);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse-stem JEPA core: masking, sparse ops, schedules, PCA and training";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<DegeneracyError>(m, "DegeneracyError", PyExc_ArithmeticError);

  m.def("masked_count", &masked_count, py::arg("num_patches"), py::arg("ratio"));
  m.def(
      "blockwise_mask",
      [](std::int64_t gh, std::int64_t gw, double ratio, std::uint64_t seed, std::int64_t min_block, double min_aspect) {
        Rng rng(seed);
        return blockwise_mask(gh, gw, ratio, rng, {min_block, min_aspect}).masked;
      },
      py::arg("grid_h"), py::arg("grid_w"), py::arg("ratio"), py::arg("seed") = 0, py::arg("min_block") = 16,
      py::arg("min_aspect") = 0.3, "Sorted masked patch indices of a blockwise draw.");
  m.def(
      "random_mask",
      [](std::int64_t gh, std::int64_t gw, double ratio, std::uint64_t seed) {
        Rng rng(seed);
        return random_mask(gh, gw, ratio, rng).masked;
      },
      py::arg("grid_h"), py::arg("grid_w"), py::arg("ratio"), py::arg("seed") = 0);
  m.def(
      "mask_contiguity",
      [](std::int64_t gh, std::int64_t gw, std::vector<std::int64_t> idx) {
        return mask_contiguity(MaskSet::from_indices(gh, gw, std::move(idx)));
      },
      py::arg("grid_h"), py::arg("grid_w"), py::arg("masked"));

  m.def(
      "sparse_conv2d",
      [](const Array& x, const Array& w, const Array& b, std::int64_t stride, std::int64_t padding,
         const std::vector<std::vector<std::int64_t>>& masked, std::int64_t patch) {
        return sparse_map_result(sparse_conv2d(sparse_map_from(x, masked, patch), to_tensor(w), to_tensor(b), stride, padding));
      },
      py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("padding") = 0,
      py::arg("masked") = std::vector<std::vector<std::int64_t>>{}, py::arg("patch") = 16,
      "x is [B,H,W,C]; weight [Cout,Cin,K,K]. Returns (features, activity).");
  m.def(
      "sparse_max_blur_pool",
      [](const Array& x, const std::vector<std::vector<std::int64_t>>& masked, std::int64_t patch) {
        return sparse_map_result(sparse_max_blur_pool(sparse_map_from(x, masked, patch)));
      },
      py::arg("x"), py::arg("masked") = std::vector<std::vector<std::int64_t>>{}, py::arg("patch") = 16);

  m.def(
      "smooth_l1", [](const Array& p, const Array& t, double beta) { return ops::smooth_l1(to_tensor(p), to_tensor(t), beta).item(); },
      py::arg("pred"), py::arg("target"), py::arg("beta") = 1.0);
  m.def(
      "masked_loss",
      [](const Array& pred, const Array& target, const std::vector<std::vector<std::int64_t>>& masked, std::int64_t gh,
         std::int64_t gw, double beta) {
        auto masks = masks_from(masked, gh, gw);
        return masked_loss(to_tensor(pred), to_tensor(target), std::span<const MaskSet>(masks), beta).item();
      },
      py::arg("pred"), py::arg("target"), py::arg("masked"), py::arg("grid_h"), py::arg("grid_w"), py::arg("beta") = 1.0);
  m.def("sinusoidal_positions", [](std::int64_t gh, std::int64_t gw, std::int64_t d) {
    return to_array(sinusoidal_positions<double>(gh, gw, d));
  });

  py::class_<ScheduleConfig>(m, "ScheduleConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &ScheduleConfig::epochs)
      .def_readwrite("warmup_epochs", &ScheduleConfig::warmup_epochs)
      .def_readwrite("flat_fraction", &ScheduleConfig::flat_fraction)
      .def_property_readonly("warmup_end", &ScheduleConfig::warmup_end)
      .def_property_readonly("flat_end", &ScheduleConfig::flat_end);
  m.def("lr_at", &lr_at, py::arg("t"), py::arg("cfg") = ScheduleConfig{});
  m.def("wd_at", &wd_at, py::arg("t"), py::arg("cfg") = ScheduleConfig{});
  m.def("ema_at", &ema_at, py::arg("t"), py::arg("cfg") = ScheduleConfig{});

  m.def(
      "pca",
      [](const Array& x, std::int64_t k) {
        if (x.ndim() != 2) throw DimensionError("pca expects a 2-D array");
        std::vector<double> rows(x.data(), x.data() + x.size());
        auto r = pca(rows, x.shape(0), x.shape(1), k);
        Array comps({r.k, r.dim}), proj({x.shape(0), static_cast<py::ssize_t>(r.k)});
        std::copy(r.components.begin(), r.components.end(), comps.mutable_data());
        std::copy(r.projections.begin(), r.projections.end(), proj.mutable_data());
        return py::make_tuple(comps, proj, r.explained_variance);
      },
      py::arg("x"), py::arg("k") = 3, "Returns (components [k,d], projections [M,k], explained variance).");
  m.def(
      "foreground_split",
      [](const Array& proj, double threshold) {
        std::vector<double> v(proj.data(), proj.data() + proj.size());
        return foreground_split(v, proj.shape(1), threshold);
      },
      py::arg("projections"), py::arg("threshold") = 0.0);

  m.def("encoder_parameter_count", [](const std::string& name) {
    if (name == "scott7_16") return encoder_parameter_count(EncoderConfig::scott7_16());
    if (name == "scott12_16") return encoder_parameter_count(EncoderConfig::scott12_16());
    throw ConfigError("unknown encoder '" + name + "'");
  });
  m.def("default_config", [] { return TrainConfig{}.to_text(); });
  m.def("desk_config", [] { return TrainConfig::desk().to_text(); });
  m.def("validate_config", [](const std::string& text) { return parse_config_text(text).to_text(); });

  m.def(
      "pretrain",
      [](const std::string& config_text, const std::string& data, const std::string& out_dir, std::int64_t stop_at) {
        auto cfg = parse_config_text(config_text);
        auto ds = take_fraction(load_dataset(data, cfg.seed), cfg.data_fraction, cfg.seed);
        PretrainOptions opts;
        opts.out_dir = out_dir;
        opts.stop_at = stop_at;
        PretrainResult res;
        {
          py::gil_scoped_release release;
          res = pretrain(ds, cfg, opts);
        }
        py::list losses;
        for (const auto& s : res.metrics) losses.append(s.loss);
        return py::make_tuple(res.last_checkpoint.string(), losses);
      },
      py::arg("config_text"), py::arg("data"), py::arg("out_dir"), py::arg("stop_at") = -1,
      "Run pretraining; returns (last checkpoint path, per-step losses).");
  m.def("read_checkpoint_meta", [](const std::string& path) { return read_checkpoint(path).meta; });
}
