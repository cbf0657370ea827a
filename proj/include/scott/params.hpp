#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scott/rng.hpp"
#include "scott/tensor.hpp"

namespace scott {

/// Ordered (name, tensor) list. Tensors alias module storage, so writes through
/// the list update the owning module.
template <Real T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <Real T>
std::int64_t count_parameters(const NamedTensors<T>& params) {
  std::int64_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

/// Leaf parameter initialised uniformly in ±1/sqrt(fan_in).
template <Real T>
Tensor<T> init_fan_in_uniform(Shape shape, std::int64_t fan_in, Rng& rng);

/// Leaf parameter from a normal(0, stddev) truncated at ±2 stddev.
template <Real T>
Tensor<T> init_trunc_normal(Shape shape, double stddev, Rng& rng);

/// Leaf parameter filled with a constant.
template <Real T>
Tensor<T> init_constant(Shape shape, T value);

/// Copy values of `src` into `dst` by position; names and shapes must match.
template <Real T>
void copy_parameters(const NamedTensors<T>& src, NamedTensors<T>& dst);

}  // namespace scott
