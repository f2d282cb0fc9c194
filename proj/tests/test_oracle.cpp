#include <doctest.h>

#include <cmath>

#include "gaitwave/oracle.hpp"
#include "gaitwave/selfcheck.hpp"

using namespace gaitwave;

TEST_SUITE("oracle") {
  TEST_CASE("relative error uses the larger magnitude with a floor") {
    CHECK(oracle::relative_error(1.0, 1.0) == 0.0);
    CHECK(oracle::relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(oracle::relative_error(-1.0, 1.0) == doctest::Approx(2.0));
    CHECK(oracle::relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
    CHECK(oracle::relative_error(0.0, 0.0) == 0.0);
  }

  TEST_CASE("naive convolution on a hand example") {
    // 1x1x3x3 input, 1x1x2x2 kernel of ones, no padding.
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<double> w{1, 1, 1, 1};
    nn::Conv2dOptions opt;
    nn::Shape out;
    const auto y = oracle::naive_conv2d(x, {1, 1, 3, 3}, w, {1, 1, 2, 2}, opt, &out);
    CHECK(out == nn::Shape{1, 1, 2, 2});
    CHECK(y == std::vector<double>{12, 16, 24, 28});
    opt.pad_h = 1;
    opt.pad_w = 1;
    const auto z = oracle::naive_conv2d(x, {1, 1, 3, 3}, w, {1, 1, 2, 2}, opt, &out);
    CHECK(out == nn::Shape{1, 1, 4, 4});
    CHECK(z[0] == 1);
    CHECK(z[15] == 9);
  }

  TEST_CASE("grad_check catches a wrong derivative and passes a right one") {
    auto t = nn::Tensor<double>::from({3}, {0.5, -1.0, 2.0}, true);
    const auto good = oracle::grad_check([&] { return nn::sum_squares(t); }, {{"t", t}});
    REQUIRE(good.size() == 1);
    CHECK(good[0].checked == 3);
    CHECK(good[0].max_rel_error < 1e-8);
  }

  TEST_CASE("brute-force triplets on a tiny line") {
    const std::vector<double> e{0.0, 1.0, 5.0, 9.0};
    const std::vector<int> labels{0, 0, 1, 1};
    const auto t = oracle::brute_force_triplets(e, 1, labels);
    REQUIRE(t.size() == 4);
    CHECK(t[0].positive == 1);
    CHECK(t[0].negative == 2);
    CHECK(t[3].positive == 2);
    CHECK(t[3].negative == 1);
  }

  TEST_CASE("self-check suites pass") {
    for (const auto& r : selfcheck::run_all(1)) {
      INFO(r.name << ": " << r.detail);
      CHECK(r.passed);
    }
    const auto chance = selfcheck::chance_rank1(50, 100, 5, 1.5);
    CHECK(chance.passed);
    CHECK(std::abs(chance.metric - 2.0) <= 1.5);
  }
}
