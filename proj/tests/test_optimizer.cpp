#include <doctest.h>

#include <cmath>

#include "lt/optimizer.hpp"
#include "lt/params.hpp"

namespace {

lt::ParamStore scalar_store(double value, double grad) {
  lt::ParamStore store;
  lt::Param& p = store.add("w", {1});
  p.value(0) = value;
  p.grad(0) = grad;
  return store;
}

}  // namespace

TEST_CASE("first Adam step moves by about -lr") {
  // With bias correction the first update is -lr * g / (|g| + eps-ish).
  lt::ParamStore store = scalar_store(1.0, 1.0);
  lt::Adam opt({.lr = 0.1, .clip_norm = 0.0});
  opt.step(store);
  CHECK(store.at("w").value(0) == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(opt.steps() == 1);

  // Sign flips with the gradient.
  lt::ParamStore neg = scalar_store(1.0, -2.0);
  lt::Adam opt2({.lr = 0.1, .clip_norm = 0.0});
  opt2.step(neg);
  CHECK(neg.at("w").value(0) == doctest::Approx(1.0 + 0.1).epsilon(1e-6));
}

TEST_CASE("zero gradient leaves the parameter in place") {
  lt::ParamStore store = scalar_store(2.5, 0.0);
  lt::Adam opt({.lr = 0.1});
  opt.step(store);
  CHECK(store.at("w").value(0) == 2.5);
}

TEST_CASE("repeated constant gradients keep a steady step size") {
  lt::ParamStore store = scalar_store(0.0, 1.0);
  lt::Adam opt({.lr = 0.01, .clip_norm = 0.0});
  double prev = store.at("w").value(0);
  for (int i = 0; i < 20; ++i) {
    store.at("w").grad(0) = 1.0;
    opt.step(store);
    const double step = prev - store.at("w").value(0);
    CHECK(step == doctest::Approx(0.01).epsilon(1e-3));
    prev = store.at("w").value(0);
  }
}

TEST_CASE("global norm clipping rescales gradients") {
  lt::ParamStore store;
  lt::Param& a = store.add("a", {2});
  a.grad(0) = 3.0;
  a.grad(1) = 0.0;
  lt::Param& b = store.add("b", {1});
  b.grad(0) = 4.0;
  // Global norm is 5; clip to 1 rescales by 1/5.
  const double norm = lt::clip_grad_norm(store, 1.0);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(store.at("a").grad(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(store.at("b").grad(0) == doctest::Approx(0.8).epsilon(1e-12));

  // Already within bounds: untouched.
  const double small = lt::clip_grad_norm(store, 10.0);
  CHECK(small == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(store.at("a").grad(0) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("warmup ramps the learning rate linearly") {
  lt::ParamStore store = scalar_store(0.0, 1.0);
  lt::Adam opt({.lr = 0.1, .clip_norm = 0.0, .warmup_steps = 10});
  opt.step(store);
  // First step runs at lr/10.
  CHECK(store.at("w").value(0) == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("moment buffers are exposed for checkpointing") {
  lt::ParamStore store = scalar_store(1.0, 1.0);
  lt::Adam opt({.lr = 0.1});
  opt.step(store);
  REQUIRE(opt.first_moments().size() == 1);
  REQUIRE(opt.second_moments().size() == 1);
  CHECK(opt.first_moments()[0](0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(opt.second_moments()[0](0) == doctest::Approx(0.001).epsilon(1e-12));
  opt.set_steps(7);
  CHECK(opt.steps() == 7);
}
