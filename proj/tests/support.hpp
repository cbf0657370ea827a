#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "scott/ops.hpp"
#include "scott/rng.hpp"
#include "scott/tensor.hpp"

namespace scott::test {

template <Real T>
Tensor<T> randn(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(scale * rng.normal());
  return Tensor<T>(std::move(shape), std::move(v));
}

template <Real T>
Tensor<T> leaf(Shape shape, Rng& rng, double scale = 1.0) {
  auto t = randn<T>(std::move(shape), rng, scale);
  t.set_requires_grad();
  return t;
}

/// sum(out ⊙ r) with a fixed random r, so every output element carries weight.
inline Tensor<double> probe_loss(const Tensor<double>& out, Rng& rng) {
  return ops::sum(ops::mul(out, randn<double>(out.shape(), rng)));
}

struct GradCheck {
  double worst = 0.0;  // largest norm-wise relative error over inputs
  bool ok(double tol = 1e-4) const { return worst < tol; }
};

/// Central finite differences against the tape gradient for every element of
/// every input. `f` must be deterministic and return a scalar.
inline GradCheck grad_check(std::vector<Tensor<double>> inputs, const std::function<Tensor<double>()>& f,
                            double h = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  {
    Tape<double> tape;
    tape.backward(f());
  }
  GradCheck res;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.grad_data().begin(), t.grad_data().end());
    analytic.resize(static_cast<std::size_t>(t.numel()), 0.0);
    double num2 = 0, diff2 = 0, an2 = 0;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      double fp, fm;
      {
        NoGrad ng;
        fp = f().item();
      }
      data[i] = orig - h;
      {
        NoGrad ng;
        fm = f().item();
      }
      data[i] = orig;
      const double num = (fp - fm) / (2 * h);
      num2 += num * num;
      an2 += analytic[i] * analytic[i];
      diff2 += (num - analytic[i]) * (num - analytic[i]);
    }
    const double denom = std::max({std::sqrt(num2), std::sqrt(an2), 1e-8});
    res.worst = std::max(res.worst, std::sqrt(diff2) / denom);
  }
  return res;
}

}  // namespace scott::test
