#include <doctest.h>

#include <cmath>

#include "gaitwave/error.hpp"
#include "gaitwave/fusion.hpp"
#include "gaitwave/nn/layers.hpp"
#include "gaitwave/nn/ops.hpp"
#include "gaitwave/oracle.hpp"
#include "helpers.hpp"

using namespace gaitwave;
using namespace gaitwave::nn;
using T64 = Tensor<double>;

namespace {

T64 randn(Shape shape, Rng& rng, bool requires_grad = true) {
  auto t = T64::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

int between(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

// Scalarizes an op against fixed random weights.
std::function<T64()> weighted(std::function<T64()> f, Rng& rng) {
  std::vector<double> w(f().numel());
  for (auto& v : w) v = rng.normal();
  return [f = std::move(f), w] { return weighted_sum(f(), w); };
}

double worst(const std::vector<oracle::GradCheckResult>& rs) {
  double m = 0.0;
  for (const auto& r : rs) m = std::max(m, r.max_rel_error);
  return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

constexpr int kInstances = 20;
constexpr double kGradTol = 1e-4;

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d: identity, constant averaging and the naive oracle") {
    Rng rng(1);
    auto x = randn({2, 3, 5, 6}, rng, false);
    auto eye = T64::zeros({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) eye.data()[c * 3 + c] = 1.0;
    const auto id = conv2d(x, eye, Conv2dOptions{});
    CHECK(std::equal(id.data().begin(), id.data().end(), x.data().begin()));

    auto flat = T64::full({1, 1, 6, 6}, 2.5);
    auto avg = T64::full({1, 1, 3, 3}, 1.0 / 9);
    const auto y = conv2d(flat, avg, Conv2dOptions::same(3, 3));
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const int rows = 3 - (i == 0) - (i == 5), cols = 3 - (j == 0) - (j == 5);
        CHECK(y.data()[i * 6 + j] == doctest::Approx(2.5 * rows * cols / 9).epsilon(1e-14));
      }

    auto xr = randn({2, 3, 8, 8}, rng, false);
    auto k = randn({4, 3, 3, 3}, rng, false);
    for (auto opt : {Conv2dOptions::same(3, 3), Conv2dOptions{}, Conv2dOptions{2, 1, 1, 2}}) {
      Shape shape;
      const auto want = oracle::naive_conv2d({xr.data().begin(), xr.data().end()}, xr.shape(),
                                             {k.data().begin(), k.data().end()}, k.shape(), opt, &shape);
      const auto got = conv2d(xr, k, opt);
      CHECK(got.shape() == shape);
      CHECK(test::max_abs_diff({got.data().begin(), got.data().end()}, want) < 1e-12);
    }
    // Single precision against the double oracle.
    auto xf = Tensor<float>::zeros({2, 3, 8, 8});
    auto kf = Tensor<float>::zeros({4, 3, 3, 3});
    for (std::size_t i = 0; i < xf.numel(); ++i) xf.data()[i] = static_cast<float>(xr.data()[i]);
    for (std::size_t i = 0; i < kf.numel(); ++i) kf.data()[i] = static_cast<float>(k.data()[i]);
    const auto yf = conv2d(xf, kf, Conv2dOptions::same(3, 3));
    const auto want = oracle::naive_conv2d({xf.data().begin(), xf.data().end()}, xf.shape(),
                                           {kf.data().begin(), kf.data().end()}, kf.shape(), Conv2dOptions::same(3, 3));
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(yf.data()[i] - want[i]) < 1e-5);
  }

  TEST_CASE("conv2d shape errors") {
    auto x = T64::zeros({1, 2, 4, 4});
    CHECK(kind_of([&] { conv2d(x, T64::zeros({3, 3, 3, 3}), Conv2dOptions{}); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { conv2d(x, T64::zeros({3, 2, 5, 5}), Conv2dOptions{}); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { conv2d(T64::zeros({2, 4, 4}), T64::zeros({3, 2, 1, 1}), Conv2dOptions{}); }) == ErrorKind::ShapeMismatch);
  }

  TEST_CASE("batch norm examples and running statistics") {
    Rng rng(2);
    // Exactly standardized channels pass through unchanged (up to eps).
    auto x = T64::zeros({4, 2, 1, 2});
    const double vals[] = {1, -1, 1, -1, -1, 1, -1, 1};
    for (int n = 0; n < 4; ++n)
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < 2; ++k) x.data()[(n * 2 + c) * 2 + k] = vals[n * 2 + k] * (c == 0 ? 1 : -1);
    auto g = T64::full({2}, 1.0), b = T64::zeros({2}), rm = T64::zeros({2}), rv = T64::full({2}, 1.0);
    const auto y = batch_norm(x, g, b, rm, rv, BatchNormOptions{});
    CHECK(test::max_abs_diff({y.data().begin(), y.data().end()}, {x.data().begin(), x.data().end()}) < 1e-5);

    auto g0 = T64::zeros({2}), b5 = T64::full({2}, 5.0);
    for (const auto out = batch_norm(randn({3, 2, 2, 2}, rng, false), g0, b5, rm, rv, BatchNormOptions{}); double v : out.data()) CHECK(v == 5.0);

    auto r = randn({6, 3, 4, 5}, rng, false);
    for (auto& v : r.data()) v = 3.0 * v + 1.5;
    auto g1 = T64::full({3}, 1.0), b0 = T64::zeros({3}), m3 = T64::zeros({3}), v3 = T64::full({3}, 1.0);
    const auto z = batch_norm(r, g1, b0, m3, v3, BatchNormOptions{});
    for (int c = 0; c < 3; ++c) {
      double m = 0, q = 0, raw_m = 0, raw_q = 0;
      const int count = 6 * 20;
      for (int n = 0; n < 6; ++n)
        for (int k = 0; k < 20; ++k) {
          m += z.data()[(n * 3 + c) * 20 + k];
          raw_m += r.data()[(n * 3 + c) * 20 + k];
        }
      m /= count;
      raw_m /= count;
      for (int n = 0; n < 6; ++n)
        for (int k = 0; k < 20; ++k) {
          q += std::pow(z.data()[(n * 3 + c) * 20 + k] - m, 2);
          raw_q += std::pow(r.data()[(n * 3 + c) * 20 + k] - raw_m, 2);
        }
      CHECK(std::abs(m) < 1e-5);
      CHECK(std::abs(q / count - 1.0) < 1e-4);
      CHECK(m3.data()[c] == doctest::Approx(0.1 * raw_m).epsilon(1e-12));
      CHECK(v3.data()[c] == doctest::Approx(0.9 + 0.1 * raw_q / (count - 1)).epsilon(1e-12));
    }

    // Eval mode uses the running estimates.
    BatchNormOptions eval;
    eval.training = false;
    auto em = T64::from({1}, {2.0}), ev = T64::from({1}, {4.0}), eg = T64::from({1}, {3.0}), eb = T64::from({1}, {1.0});
    const auto e = batch_norm(T64::from({2, 1}, {2.0, 6.0}), eg, eb, em, ev, eval);
    CHECK(e.data()[0] == doctest::Approx(1.0));
    CHECK(e.data()[1] == doctest::Approx(1.0 + 3.0 * 4.0 / std::sqrt(4.0 + 1e-5)));
    CHECK(em.data()[0] == 2.0);

    // A constant channel stays finite thanks to the variance floor.
    auto c = T64::full({4, 1, 2, 2}, 3.0);
    auto cg = T64::full({1}, 1.0), cb = T64::zeros({1}), cm = T64::zeros({1}), cv = T64::full({1}, 1.0);
    for (const auto out = batch_norm(c, cg, cb, cm, cv, BatchNormOptions{}); double v : out.data()) CHECK(v == 0.0);
    CHECK(kind_of([&] { batch_norm(c, T64::zeros({2}), cb, cm, cv, BatchNormOptions{}); }) == ErrorKind::ShapeMismatch);
  }

  TEST_CASE("pointwise and reduction layers") {
    const auto r = relu(T64::from({2}, {-1.0, 2.0}));
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 2.0);
    const auto p = global_avg_pool(T64::full({2, 3, 4, 5}, 0.75));
    CHECK(p.shape() == Shape{2, 3});
    for (double v : p.data()) CHECK(v == 0.75);

    Rng rng(3);
    const auto n = l2_normalize(randn({5, 7}, rng, false));
    for (int i = 0; i < 5; ++i) {
      double s = 0;
      for (int j = 0; j < 7; ++j) s += n.data()[i * 7 + j] * n.data()[i * 7 + j];
      CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-6);
    }
    for (const auto out = l2_normalize(T64::zeros({2, 3})); double v : out.data()) CHECK(v == 0.0);

    const auto cat = concat<double>({T64::from({1, 2}, {1, 2}), T64::from({1, 1}, {3})}, 1);
    CHECK(cat.shape() == Shape{1, 3});
    CHECK(cat.data()[2] == 3.0);
    CHECK(kind_of([] { concat<double>({T64::zeros({1, 2}), T64::zeros({2, 1})}, 1); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([] { reshape(T64::zeros({2, 3}), {4, 2}); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([] { linear(T64::zeros({2, 3}), T64::zeros({4, 2}), T64()); }) == ErrorKind::ShapeMismatch);

    const auto lin = linear(T64::from({1, 2}, {1.0, 2.0}), T64::from({2, 2}, {1, 0, 3, 4}), T64::from({2}, {0.5, -1}));
    CHECK(lin.data()[0] == 1.5);
    CHECK(lin.data()[1] == 10.0);
    const auto rows = take_rows(T64::from({3, 1}, {7, 8, 9}), {2, 2, 0});
    CHECK(rows.data()[0] == 9.0);
    CHECK(rows.data()[2] == 7.0);
  }

  TEST_CASE("backward basics") {
    Rng rng(4);
    auto x = randn({3, 4}, rng);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
    auto y = randn({3, 4}, rng);
    backward(sum_squares(y));
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.grad()[i] == 2.0 * y.data()[i]);
    CHECK(kind_of([&] { backward(relu(y)); }) == ErrorKind::NotScalar);
    CHECK(kind_of([&] { (void)y.item(); }) == ErrorKind::NotScalar);

    // Reused nodes accumulate from every consumer.
    auto z = T64::from({1}, {3.0}, true);
    backward(sum(concat<double>({z, z, z}, 0)));
    CHECK(z.grad()[0] == 3.0);

    {
      NoGradGuard guard;
      CHECK_FALSE(grad_enabled());
      CHECK_FALSE(sum(x).requires_grad());
    }
    CHECK(grad_enabled());
  }

  TEST_CASE("gradients of every layer on random instances") {
    Rng rng(5);
    double conv = 0, bn = 0, bn_eval = 0, rl = 0, gap = 0, cat = 0, lin = 0, l2 = 0, tl = 0;
    for (int k = 0; k < kInstances; ++k) {
      const int N = between(rng, 1, 3), C = between(rng, 1, 3), H = between(rng, 2, 6), W = between(rng, 2, 6);
      const int Co = between(rng, 1, 3), kh = 2 * between(rng, 0, 2) + 1, kw = 2 * between(rng, 0, 2) + 1;
      auto x = randn({N, C, H, W}, rng);
      auto w = randn({Co, C, kh, kw}, rng);
      const auto opt = Conv2dOptions::same(kh, kw);
      conv = std::max(conv, worst(oracle::grad_check(weighted([=] { return conv2d(x, w, opt); }, rng), {{"x", x}, {"w", w}}, 24, k)));

      auto xb = randn({N + 1, C, H, W}, rng), g = randn({C}, rng), b = randn({C}, rng);
      auto rm = T64::zeros({C}), rv = T64::full({C}, 1.0);
      bn = std::max(bn, worst(oracle::grad_check(
                            weighted([=]() mutable { return batch_norm(xb, g, b, rm, rv, BatchNormOptions{}); }, rng),
                            {{"x", xb}, {"gamma", g}, {"beta", b}}, 24, k)));
      BatchNormOptions eo;
      eo.training = false;
      auto em = randn({C}, rng, false), ev = T64::full({C}, 0.5 + rng.uniform());
      bn_eval = std::max(bn_eval, worst(oracle::grad_check(
                                      weighted([=]() mutable { return batch_norm(xb, g, b, em, ev, eo); }, rng),
                                      {{"x", xb}, {"gamma", g}, {"beta", b}}, 24, k)));

      auto xr = randn({N, C, H}, rng);
      for (auto& v : xr.data())
        if (std::abs(v) < 0.05) v = std::copysign(0.05, v);
      rl = std::max(rl, worst(oracle::grad_check(weighted([=] { return relu(xr); }, rng), {{"x", xr}}, 24, k)));
      gap = std::max(gap, worst(oracle::grad_check(weighted([=] { return global_avg_pool(x); }, rng), {{"x", x}}, 24, k)));
      auto x2 = randn({N, Co, H, W}, rng);
      cat = std::max(cat, worst(oracle::grad_check(weighted([=] { return concat<double>({x, x2}, 1); }, rng),
                                                   {{"a", x}, {"b", x2}}, 24, k)));
      const int in = between(rng, 1, 8), out = between(rng, 1, 6);
      auto xl = randn({N, in}, rng), wl = randn({out, in}, rng), bl = randn({out}, rng);
      lin = std::max(lin, worst(oracle::grad_check(weighted([=] { return linear(xl, wl, bl); }, rng),
                                                   {{"x", xl}, {"W", wl}, {"b", bl}}, 24, k)));
      l2 = std::max(l2, worst(oracle::grad_check(weighted([=] { return l2_normalize(xl); }, rng), {{"x", xl}}, 24, k)));
      const int P = between(rng, 2, 4), K = between(rng, 2, 3);
      auto e = randn({P * K, 4}, rng);
      std::vector<int> labels;
      for (int p = 0; p < P; ++p)
        for (int q = 0; q < K; ++q) labels.push_back(p);
      tl = std::max(tl, worst(oracle::grad_check([=] { return fusion::triplet_loss(e, labels, 0.5); }, {{"e", e}}, 24, k)));
    }
    CHECK(conv < kGradTol);
    CHECK(bn < kGradTol);
    CHECK(bn_eval < kGradTol);
    CHECK(rl < kGradTol);
    CHECK(gap < kGradTol);
    CHECK(cat < kGradTol);
    CHECK(lin < kGradTol);
    CHECK(l2 < kGradTol);
    CHECK(tl < kGradTol);
  }

  TEST_CASE("the gradient checker flags a wrong backward rule") {
    Rng rng(6);
    auto x = randn({4}, rng);
    // y = x * x with a backward that forgets the factor 2.
    auto broken_square = [](const T64& in) {
      std::vector<double> d(in.data().begin(), in.data().end());
      for (auto& v : d) v *= v;
      return make_result<double>(in.shape(), std::move(d), {&in}, [](TensorImpl<double>& self) {
        auto& src = *self.inputs[0];
        auto& g = src.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * src.data[i];
      });
    };
    const auto rs = oracle::grad_check([=] { return sum(broken_square(x)); }, {{"x", x}});
    CHECK(worst(rs) > 0.4);
  }

  TEST_CASE("conv2d and linear are linear in their input") {
    Rng rng(7);
    auto a = randn({2, 3, 5, 5}, rng, false), b = randn({2, 3, 5, 5}, rng, false), k = randn({2, 3, 3, 3}, rng, false);
    auto mix = T64::zeros(a.shape());
    const double s = 0.7, t = -1.9;
    for (std::size_t i = 0; i < a.numel(); ++i) mix.data()[i] = s * a.data()[i] + t * b.data()[i];
    const auto opt = Conv2dOptions::same(3, 3);
    const auto ya = conv2d(a, k, opt), yb = conv2d(b, k, opt), ym = conv2d(mix, k, opt);
    for (std::size_t i = 0; i < ym.numel(); ++i) CHECK(std::abs(ym.data()[i] - s * ya.data()[i] - t * yb.data()[i]) < 1e-6);

    auto xa = randn({3, 6}, rng, false), xb = randn({3, 6}, rng, false), w = randn({4, 6}, rng, false);
    auto xm = T64::zeros({3, 6});
    for (std::size_t i = 0; i < xa.numel(); ++i) xm.data()[i] = s * xa.data()[i] + t * xb.data()[i];
    const auto la = linear(xa, w, T64()), lb = linear(xb, w, T64()), lm = linear(xm, w, T64());
    for (std::size_t i = 0; i < lm.numel(); ++i) CHECK(std::abs(lm.data()[i] - s * la.data()[i] - t * lb.data()[i]) < 1e-6);
  }

  TEST_CASE("parameter store and initializers") {
    ParamStore<double> store;
    Rng rng(8);
    Conv2d<double> conv(store, "stem", 2, 4, 3, 3, rng);
    BatchNorm<double> bn(store, "bn", 4);
    Linear<double> fc(store, "fc", 10, 3, rng);
    CHECK(store.contains("stem.weight"));
    CHECK(store.contains("bn.running_var"));
    CHECK(store.trainable().size() == 5);
    CHECK(store.parameter_count() == 4 * 2 * 9 + 4 + 4 + 30 + 3);
    const double bound = std::sqrt(6.0 / 18);
    for (double v : conv.weight.data()) CHECK(std::abs(v) <= bound);
    for (double v : fc.weight.data()) CHECK(std::abs(v) <= 1.0 / std::sqrt(10.0));
    for (double v : bn.gamma.data()) CHECK(v == 1.0);
    CHECK_THROWS_AS(store.add_param("fc.bias", {3}), Error);
    CHECK_THROWS_AS(store.get("nope"), Error);
  }
}
