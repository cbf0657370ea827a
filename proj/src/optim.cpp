#include "scott/optim.hpp"

#include <cmath>

#include "scott/errors.hpp"

namespace scott {

template <Real T>
AdamW<T>::AdamW(NamedTensors<T> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
  }
}

template <Real T>
void AdamW<T>::step(double lr, double wd) {
  ++steps_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    auto w = p.mutable_data();
    const auto g = p.grad_data();
    const bool has_g = !g.empty();
    auto& m = m_[i];
    auto& v = v_[i];
    const bool decay = cfg_.decay_vectors || p.rank() >= 2;
    const T shrink = static_cast<T>(1.0 - lr * wd);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has_g ? static_cast<double>(g[j]) : 0.0;
      m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * gj);
      v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * gj * gj);
      if (decay) w[j] *= shrink;
      const double mh = m[j] / c1;
      const double vh = v[j] / c2;
      w[j] -= static_cast<T>(lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
  }
}

template <Real T>
NamedTensors<T> AdamW<T>::state() const {
  NamedTensors<T> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("m." + params_[i].first, Tensor<T>(params_[i].second.shape(), m_[i]));
    out.emplace_back("v." + params_[i].first, Tensor<T>(params_[i].second.shape(), v_[i]));
  }
  return out;
}

template <Real T>
void AdamW<T>::load_state(const NamedTensors<T>& moments, std::int64_t steps) {
  if (moments.size() != 2 * params_.size()) throw StateError("optimizer state has the wrong number of tensors");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [mn, mt] = moments[2 * i];
    const auto& [vn, vt] = moments[2 * i + 1];
    const auto& [pn, p] = params_[i];
    if (mn != "m." + pn || vn != "v." + pn) throw StateError("optimizer state name mismatch at '" + pn + "'");
    if (mt.shape() != p.shape() || vt.shape() != p.shape())
      throw StateError("optimizer state shape mismatch at '" + pn + "'");
    m_[i].assign(mt.data().begin(), mt.data().end());
    v_[i].assign(vt.data().begin(), vt.data().end());
  }
  steps_ = steps;
}

template <Real T>
double grad_norm(const NamedTensors<T>& params) {
  double s = 0.0;
  for (const auto& [name, p] : params)
    for (T g : p.grad_data()) s += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(s);
}

template <Real T>
void zero_grads(NamedTensors<T>& params) {
  for (auto& [name, p] : params)
    if (p.has_grad()) p.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;
template double grad_norm(const NamedTensors<float>&);
template double grad_norm(const NamedTensors<double>&);
template void zero_grads(NamedTensors<float>&);
template void zero_grads(NamedTensors<double>&);

}  // namespace scott
