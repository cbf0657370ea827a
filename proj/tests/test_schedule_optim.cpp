#include <doctest.h>

#include <cmath>

#include "scott/optim.hpp"
#include "scott/schedule.hpp"
#include "support.hpp"

using namespace scott;

TEST_CASE("schedule endpoints") {
  ScheduleConfig s;
  CHECK(lr_at(0.0, s) == 1e-6);
  CHECK(lr_at(s.warmup_end(), s) == 5e-4);
  CHECK(lr_at(1.0, s) == 1e-5);
  CHECK(wd_at(0.0, s) == 0.04);
  CHECK(wd_at(1.0, s) == 0.4);
  CHECK(ema_at(0.0, s) == 0.996);
  CHECK(ema_at(1.0, s) == 1.0);
}

TEST_CASE("schedule is continuous at segment joins") {
  ScheduleConfig s;
  for (double join : {s.warmup_end(), s.flat_end()}) {
    const double eps = 1e-13;
    CHECK(std::abs(lr_at(join - eps, s) - lr_at(join + eps, s)) < 1e-12);
  }
}

TEST_CASE("lr is flat at the peak between warmup and decay") {
  ScheduleConfig s;
  const double mid = 0.5 * (s.warmup_end() + s.flat_end());
  CHECK(lr_at(mid, s) == 5e-4);
  CHECK(lr_at(0.5 * (s.flat_end() + 1.0), s) < 5e-4);
  CHECK(lr_at(0.5 * (s.flat_end() + 1.0), s) > 1e-5);
}

TEST_CASE("schedule config validation") {
  ScheduleConfig s;
  s.warmup_epochs = 400;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(train_fraction(5, 10) == 0.5);
  CHECK(train_fraction(20, 10) == 1.0);
}

TEST_CASE("AdamW first step matches a hand computation") {
  Tensor<double> w({2, 2}, {1.0, -2.0, 0.5, 0.0});
  w.set_requires_grad();
  Tensor<double> b({2}, {1.0, 1.0});
  b.set_requires_grad();
  AdamW<double> opt({{"w", w}, {"b", b}});
  {
    Tape<double> tape;
    tape.backward(ops::sum(ops::add(ops::scale(w, 3.0), Tensor<double>({2, 2}, 0.0))));
  }
  opt.step(0.1, 0.5);
  // shrink 1 − 0.05 then −lr·m̂/(√v̂+eps) with m̂ = g, v̂ = g²
  const double step = 0.1 * 3.0 / (3.0 + 1e-8);
  CHECK(w[0] == doctest::Approx(1.0 * 0.95 - step).epsilon(1e-12));
  CHECK(w[3] == doctest::Approx(0.0 - step).epsilon(1e-12));
  // vectors are not decayed and had no gradient
  CHECK(b[0] == 1.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("AdamW state round-trips") {
  Rng rng(0);
  auto w = test::leaf<double>({3, 3}, rng);
  AdamW<double> a({{"w", w}});
  {
    Tape<double> tape;
    tape.backward(ops::sum(ops::mul(w, w)));
  }
  a.step(0.01, 0.1);
  auto w2 = w.clone();
  w2.set_requires_grad();
  AdamW<double> b({{"w", w2}});
  b.load_state(a.state(), a.steps());
  auto g = w.grad();
  for (auto* p : {&w, &w2}) {
    p->zero_grad();
    Tape<double> tape;
    tape.backward(ops::sum(ops::mul(*p, g)));
  }
  a.step(0.01, 0.1);
  b.step(0.01, 0.1);
  for (std::size_t i = 0; i < 9; ++i) CHECK(w[i] == w2[i]);
  CHECK_THROWS_AS(b.load_state({}, 1), StateError);
}
