#include <doctest.h>

#include <cmath>

#include "gaitwave/error.hpp"
#include "gaitwave/nn/optim.hpp"
#include "helpers.hpp"

using namespace gaitwave;
using namespace gaitwave::nn;

TEST_SUITE("optim") {
  TEST_CASE("zero gradient without decay leaves parameters alone") {
    ParamStore<double> store;
    auto p = store.add_param("p", {3});
    p.data()[0] = 1.5;
    p.data()[2] = -2.0;
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam<double> adam(store, cfg);
    for (int k = 0; k < 5; ++k) adam.step(0.01);
    CHECK(p.data()[0] == 1.5);
    CHECK(p.data()[1] == 0.0);
    CHECK(p.data()[2] == -2.0);
    CHECK(adam.steps() == 5);
  }

  TEST_CASE("first step matches the bias-corrected closed form") {
    ParamStore<double> store;
    auto p = store.add_param("p", {1});
    p.data()[0] = 0.25;
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam<double> adam(store, cfg);
    p.grad()[0] = 1.0;
    const double lr = 6e-3;
    adam.step(lr);
    // m_hat = 1 and v_hat = 1 after one step, so the update is lr / (1 + eps).
    CHECK(p.data()[0] == doctest::Approx(0.25 - lr / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(adam.slots()[0].m[0] == doctest::Approx(0.1));
    CHECK(adam.slots()[0].v[0] == doctest::Approx(0.001));

    // A second step with a different gradient, by hand.
    p.grad()[0] = -3.0;
    const double m = 0.9 * 0.1 + 0.1 * -3.0, v = 0.999 * 0.001 + 0.001 * 9.0;
    const double expect = p.data()[0] - lr * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    adam.step(lr);
    CHECK(p.data()[0] == doctest::Approx(expect).epsilon(1e-14));
  }

  TEST_CASE("decoupled weight decay shrinks by 1 - lr*lambda per step") {
    ParamStore<double> store;
    auto p = store.add_param("p", {2});
    p.data()[0] = 4.0;
    p.data()[1] = -1.0;
    AdamConfig cfg;
    cfg.weight_decay = 0.1;
    Adam<double> adam(store, cfg);
    double expect0 = 4.0, expect1 = -1.0;
    for (int k = 0; k < 10; ++k) {
      adam.step(0.05);
      expect0 *= 1.0 - 0.05 * 0.1;
      expect1 *= 1.0 - 0.05 * 0.1;
    }
    CHECK(p.data()[0] == doctest::Approx(expect0).epsilon(1e-14));
    CHECK(p.data()[1] == doctest::Approx(expect1).epsilon(1e-14));
  }

  TEST_CASE("buffers are not optimized") {
    ParamStore<double> store;
    store.add_param("w", {2});
    auto buf = store.add_buffer("stat", {2}, 3.0);
    Adam<double> adam(store, AdamConfig{});
    CHECK(adam.slots().size() == 1);
    adam.step(1.0);
    CHECK(buf.data()[0] == 3.0);
  }

  TEST_CASE("one-cycle endpoints and peak") {
    const double lr = 6e-3;
    for (std::int64_t total : {10, 100, 101, 3000}) {
      const auto warm = one_cycle_warmup_steps(total);
      CHECK(warm == static_cast<std::int64_t>(std::llround(0.3 * total)));
      CHECK(one_cycle_lr(0, total, lr) == lr / 25);
      CHECK(one_cycle_lr(warm, total, lr) == lr);
      CHECK(one_cycle_lr(total, total, lr) == doctest::Approx(lr / 1e4).epsilon(1e-12));
    }
    CHECK(one_cycle_lr(0, 1, lr) == lr / 25);
    CHECK(one_cycle_lr(1, 1, lr) == doctest::Approx(lr / 1e4));
  }

  TEST_CASE("one-cycle sweep is continuous and unimodal") {
    const double lr = 6e-3;
    const std::int64_t total = 99;
    std::vector<double> v;
    for (std::int64_t s = 0; s <= total; ++s) v.push_back(one_cycle_lr(s, total, lr));
    REQUIRE(v.size() == 100);
    const auto peak = std::max_element(v.begin(), v.end()) - v.begin();
    for (std::size_t i = 1; i < v.size(); ++i) {
      CHECK(std::abs(v[i] - v[i - 1]) < lr / 10);
      if (static_cast<std::ptrdiff_t>(i) <= peak)
        CHECK(v[i] >= v[i - 1]);
      else
        CHECK(v[i] <= v[i - 1]);
    }
    for (double x : v) {
      CHECK(x >= lr / 1e4 * (1 - 1e-12));
      CHECK(x <= lr);
    }
  }

  TEST_CASE("one-cycle range errors") {
    CHECK_THROWS_AS(one_cycle_lr(-1, 10, 1.0), Error);
    CHECK_THROWS_AS(one_cycle_lr(11, 10, 1.0), Error);
    try {
      one_cycle_lr(11, 10, 1.0);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::OutOfRange);
    }
  }
}
