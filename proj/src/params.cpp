#include "scott/params.hpp"

#include <cmath>

namespace scott {

template <Real T>
Tensor<T> init_fan_in_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

template <Real T>
Tensor<T> init_trunc_normal(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<T>(rng.truncated_normal(stddev));
  t.set_requires_grad(true);
  return t;
}

template <Real T>
Tensor<T> init_constant(Shape shape, T value) {
  Tensor<T> t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

template <Real T>
void copy_parameters(const NamedTensors<T>& src, NamedTensors<T>& dst) {
  if (src.size() != dst.size()) {
    throw StateError("parameter lists differ in length (" + std::to_string(src.size()) + " vs " +
                     std::to_string(dst.size()) + ")");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].first != dst[i].first || src[i].second.shape() != dst[i].second.shape()) {
      throw StateError("parameter mismatch: " + src[i].first + " vs " + dst[i].first);
    }
    auto out = dst[i].second.mutable_data();
    const auto in = src[i].second.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

#define SCOTT_INSTANTIATE_PARAMS(T)                                              \
  template Tensor<T> init_fan_in_uniform<T>(Shape, std::int64_t, Rng&);          \
  template Tensor<T> init_trunc_normal<T>(Shape, double, Rng&);                  \
  template Tensor<T> init_constant<T>(Shape, T);                                 \
  template void copy_parameters<T>(const NamedTensors<T>&, NamedTensors<T>&);

SCOTT_INSTANTIATE_PARAMS(float)
SCOTT_INSTANTIATE_PARAMS(double)

}  // namespace scott
