#include <doctest.h>

#include <cmath>

#include "gaitwave/error.hpp"
#include "gaitwave/oracle.hpp"
#include "gaitwave/stream.hpp"
#include "helpers.hpp"

using namespace gaitwave;
using namespace gaitwave::stream;
using nn::Tensor;
using T64 = Tensor<double>;

namespace {

StreamConfig small_cfg(int V = 3, int F = 8, int L = 12) {
  StreamConfig c;
  c.joints = V;
  c.scales = F;
  c.length = L;
  c.c_stem1 = 3;
  c.c_stem2 = 4;
  c.c_branch = 3;
  return c;
}

T64 randn(nn::Shape shape, Rng& rng, bool requires_grad = false) {
  auto t = T64::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

std::function<T64()> weighted(std::function<T64()> f, Rng& rng) {
  std::vector<double> w(f().numel());
  for (auto& v : w) v = rng.normal();
  return [f = std::move(f), w] { return nn::weighted_sum(f(), w); };
}

double worst(const std::vector<oracle::GradCheckResult>& rs) {
  double m = 0;
  for (const auto& r : rs) m = std::max(m, r.max_rel_error);
  return m;
}

void randomize_bn(nn::ParamStore<double>& store, Rng& rng) {
  for (const auto& e : store.entries()) {
    if (e.name.find(".bn.") == std::string::npos && e.name.find("merge_bn") == std::string::npos) continue;
    auto t = e.tensor;
    for (auto& v : t.data()) {
      if (e.name.ends_with("running_var") || e.name.ends_with("gamma"))
        v = 0.5 + rng.uniform();
      else
        v = 0.3 * rng.normal();
    }
  }
}

}  // namespace

TEST_SUITE("stream") {
  TEST_CASE("stem: zero in, zero out; shape preserved") {
    nn::ParamStore<double> store;
    Rng rng(1);
    PlaneCnn<double> cnn(small_cfg(), store, "p.", rng);
    for (const auto out = cnn.stem(T64::zeros({2, 1, 8, 12}), true); double v : out.data()) CHECK(v == 0.0);
    const auto y = cnn.stem(randn({3, 1, 5, 7}, rng), true);
    CHECK(y.shape() == nn::Shape{3, 4, 5, 7});
    CHECK_THROWS_AS(cnn.stem(T64::zeros({1, 2, 8, 12}), true), Error);
  }

  TEST_CASE("stem and block gradients") {
    nn::ParamStore<double> store;
    Rng rng(2);
    PlaneCnn<double> cnn(small_cfg(), store, "p.", rng);
    auto x = randn({1, 1, 8, 8}, rng, true);
    std::vector<std::pair<std::string, T64>> wrt{{"x", x}};
    for (const auto& e : store.trainable())
      if (e.name.find("stem") != std::string::npos) wrt.emplace_back(e.name, e.tensor);
    CHECK(worst(oracle::grad_check(weighted([&] { return cnn.stem(x, true); }, rng), wrt, 16)) < 1e-4);

    auto h = randn({2, 4, 5, 6}, rng, true);
    std::vector<std::pair<std::string, T64>> wrt2{{"h", h}};
    for (const auto& e : store.trainable())
      if (e.name.find("branch") != std::string::npos || e.name.find("merge") != std::string::npos)
        wrt2.emplace_back(e.name, e.tensor);
    CHECK(worst(oracle::grad_check(weighted([&] { return cnn.block(h, true); }, rng), wrt2, 16)) < 1e-4);
  }

  TEST_CASE("block has 2*c_branch channels and commutes with branch reordering") {
    nn::ParamStore<double> store;
    Rng rng(3);
    auto cfg = small_cfg();
    PlaneCnn<double> cnn(cfg, store, "p.", rng);
    randomize_bn(store, rng);
    const auto x = randn({2, 4, 6, 5}, rng);
    const auto y = cnn.block(x, false);
    CHECK(y.dim(1) == 2 * cfg.c_branch);

    // Evaluate the block with the branches concatenated the other way round
    // and merge_bn parameters permuted to match.
    const int cb = cfg.c_branch;
    const auto perm = [&](const T64& t) {
      auto out = T64::zeros(t.shape());
      for (int c = 0; c < 2 * cb; ++c) out.data()[c] = t.data()[(c + cb) % (2 * cb)];
      return out;
    };
    auto g = perm(cnn.merge_bn.gamma), b = perm(cnn.merge_bn.beta), rm = perm(cnn.merge_bn.running_mean),
         rv = perm(cnn.merge_bn.running_var);
    nn::BatchNormOptions eval;
    eval.training = false;
    const auto swapped = nn::batch_norm(nn::concat<double>({cnn.branch7(x, false), cnn.branch3(x, false)}, 1), g, b, rm,
                                        rv, eval);
    const int plane = 6 * 5;
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 2 * cb; ++c)
        for (int k = 0; k < plane; ++k)
          CHECK(swapped.data()[(n * 2 * cb + c) * plane + k] == y.data()[(n * 2 * cb + (c + cb) % (2 * cb)) * plane + k]);
  }

  TEST_CASE("global pooling ignores spatial permutations") {
    nn::ParamStore<double> store;
    Rng rng(4);
    PlaneCnn<double> cnn(small_cfg(), store, "p.", rng);
    const auto act = cnn.block(cnn.stem(randn({2, 1, 8, 12}, rng), true), true);
    std::vector<int> order(8 * 12);
    for (int i = 0; i < 96; ++i) order[i] = i;
    rng.shuffle(order);
    auto shuffled = T64::zeros(act.shape());
    for (int nc = 0; nc < act.dim(0) * act.dim(1); ++nc)
      for (int k = 0; k < 96; ++k) shuffled.data()[nc * 96 + k] = act.data()[nc * 96 + order[k]];
    const auto a = nn::global_avg_pool(act), b = nn::global_avg_pool(shuffled);
    CHECK(test::max_abs_diff({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}) < 1e-12);
  }

  TEST_CASE("descriptor dimensions") {
    StreamConfig full;
    full.scales = 4;
    full.length = 4;
    CHECK(full.c_out() == 64);
    CHECK(full.fc_in() == 2176);
    nn::ParamStore<float> store;
    Rng rng(5);
    WaveletStream<float> s(full, store, rng);
    CHECK(s.fc().weight.shape() == nn::Shape{128, 2176});
    const auto d = s.forward(Tensor<float>::zeros({2 * 17 * 2, 1, 4, 4}), true);
    CHECK(d.shape() == nn::Shape{2, 128});
    CHECK(store.contains("wavelet_stream.stem1.conv.weight"));
    CHECK(store.contains("wavelet_stream.merge_bn.gamma"));
    CHECK_THROWS_AS(s.forward(Tensor<float>::zeros({3, 1, 4, 4}), true), Error);
    auto bad = full;
    bad.descriptor_dim = 64;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("zero scalogram with zero FC bias gives a zero descriptor") {
    nn::ParamStore<double> store;
    Rng rng(6);
    WaveletStream<double> s(small_cfg(), store, rng);
    std::fill(s.fc().bias.data().begin(), s.fc().bias.data().end(), 0.0);
    for (const auto out = s.forward(T64::zeros({2 * 6, 1, 8, 12}), true); double v : out.data()) CHECK(v == 0.0);
  }

  TEST_CASE("constant planes stay finite") {
    nn::ParamStore<double> store;
    Rng rng(7);
    WaveletStream<double> s(small_cfg(), store, rng);
    for (const auto out = s.forward(T64::full({2 * 6, 1, 8, 12}, 3.0), true); double v : out.data()) CHECK(std::isfinite(v));
  }

  TEST_CASE("permuting joints with matching FC blocks leaves the descriptor unchanged") {
    nn::ParamStore<double> store;
    Rng rng(8);
    const auto cfg = small_cfg(4);
    WaveletStream<double> s(cfg, store, rng);
    const int B = 2, V = 4, plane = 8 * 12, block = 2 * cfg.c_out();
    const auto planes = randn({B * V * 2, 1, 8, 12}, rng);
    const auto before = s.forward(planes, true);

    const int sigma[] = {2, 0, 3, 1};  // joint j moves to slot sigma[j]
    auto moved = T64::zeros(planes.shape());
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < V; ++j)
        for (int a = 0; a < 2; ++a)
          std::copy_n(planes.data().begin() + ((b * V + j) * 2 + a) * plane, plane,
                      moved.data().begin() + ((b * V + sigma[j]) * 2 + a) * plane);
    auto w = s.fc().weight;
    const std::vector<double> old(w.data().begin(), w.data().end());
    const int in = cfg.fc_in();
    for (int o = 0; o < 128; ++o)
      for (int j = 0; j < V; ++j)
        std::copy_n(old.begin() + o * in + j * block, block, w.data().begin() + o * in + sigma[j] * block);
    const auto after = s.forward(moved, true);
    CHECK(test::max_abs_diff({before.data().begin(), before.data().end()}, {after.data().begin(), after.data().end()}) < 1e-12);
  }

  TEST_CASE("per-joint weights reduce to the shared network when copied") {
    Rng rng(9);
    auto shared_cfg = small_cfg();
    auto split_cfg = shared_cfg;
    split_cfg.share_weights_across_joints = false;
    nn::ParamStore<double> a, b;
    Rng ra(1), rb(2);
    WaveletStream<double> shared(shared_cfg, a, ra);
    WaveletStream<double> split(split_cfg, b, rb);
    CHECK(b.contains("wavelet_stream.joint2.branch7.conv.weight"));
    CHECK(b.parameter_count() > a.parameter_count());
    randomize_bn(a, rng);
    // Copy each shared tensor into every per-joint slot.
    for (const auto& e : b.entries()) {
      std::string name = e.name;
      const auto pos = name.find("joint");
      if (pos != std::string::npos) name.erase(pos, name.find('.', pos) - pos + 1);
      auto src = a.get(name);
      auto dst = e.tensor;
      std::copy(src.data().begin(), src.data().end(), dst.data().begin());
    }
    const auto planes = randn({2 * 6, 1, 8, 12}, rng);
    const auto x = shared.forward(planes, false), y = split.forward(planes, false);
    CHECK(test::max_abs_diff({x.data().begin(), x.data().end()}, {y.data().begin(), y.data().end()}) < 1e-12);
  }

  TEST_CASE("stream-only gradient check on the downsized config") {
    nn::ParamStore<double> store;
    Rng rng(10);
    WaveletStream<double> s(small_cfg(), store, rng);
    auto planes = randn({4 * 6, 1, 8, 12}, rng, true);
    std::vector<std::pair<std::string, T64>> wrt{{"planes", planes}};
    for (const auto& e : store.trainable()) wrt.emplace_back(e.name, e.tensor);
    CHECK(worst(oracle::grad_check(weighted([&] { return s.forward(planes, true); }, rng), wrt, 10)) < 1e-4);
  }

  TEST_CASE("stack_planes layout") {
    cwt::Scalogram s1, s2;
    for (auto* s : {&s1, &s2}) {
      s->joints = 2;
      s->scales = 3;
      s->length = 4;
      s->h.resize(2 * 2 * 3 * 4);
    }
    for (std::size_t k = 0; k < s1.h.size(); ++k) {
      s1.h[k] = static_cast<double>(k);
      s2.h[k] = 100.0 + static_cast<double>(k);
    }
    const auto t = stack_planes<double>({&s1, &s2});
    CHECK(t.shape() == nn::Shape{8, 1, 3, 4});
    CHECK(t.data()[s1.index(1, 0, 2, 3)] == s1.at(1, 0, 2, 3));
    CHECK(t.data()[s1.h.size() + s1.index(0, 1, 1, 1)] == s2.at(0, 1, 1, 1));
    cwt::Scalogram odd = s1;
    odd.length = 5;
    odd.h.resize(2 * 2 * 3 * 5);
    CHECK_THROWS_AS(stack_planes<double>({&s1, &odd}), Error);
  }
}
