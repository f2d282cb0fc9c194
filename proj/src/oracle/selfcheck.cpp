#include "gaitwave/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gaitwave/cwt.hpp"
#include "gaitwave/error.hpp"
#include "gaitwave/model.hpp"
#include "gaitwave/oracle.hpp"
#include "gaitwave/rng.hpp"

namespace gaitwave::selfcheck {

using nn::Tensor;
using T64 = Tensor<double>;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

T64 randn(nn::Shape shape, Rng& rng, bool requires_grad = true, double scale = 1.0) {
  auto t = T64::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal();
  return w;
}

struct GradLedger {
  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
  std::size_t retried = 0;

  void add(const std::string& prefix, const std::vector<oracle::GradCheckResult>& results) {
    for (const auto& r : results) {
      coords += r.checked;
      retried += r.retried;
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_name = prefix + "/" + r.name;
      }
    }
  }
};

// Sums a layer output against fixed random weights so every output element
// carries a distinct gradient.
std::function<T64()> scalarize(std::function<T64()> f, Rng& rng) {
  auto probe = f();
  auto w = random_weights(probe.numel(), rng);
  return [f = std::move(f), w] { return nn::weighted_sum(f(), w); };
}

void layer_checks(GradLedger& ledger, std::uint64_t seed) {
  Rng rng(seed);
  {
    auto x = randn({2, 3, 6, 7}, rng);
    auto k = randn({4, 3, 3, 5}, rng);
    auto opt = nn::Conv2dOptions::same(3, 5);
    ledger.add("conv2d", oracle::grad_check(scalarize([=] { return nn::conv2d(x, k, opt); }, rng), {{"x", x}, {"kernel", k}}));
    nn::Conv2dOptions strided{2, 2, 1, 0};
    ledger.add("conv2d_strided",
               oracle::grad_check(scalarize([=] { return nn::conv2d(x, k, strided); }, rng), {{"x", x}, {"kernel", k}}));
  }
  {
    auto x = randn({5, 3, 2, 4}, rng);
    auto gamma = randn({3}, rng);
    auto beta = randn({3}, rng);
    auto rm = T64::zeros({3});
    auto rv = T64::full({3}, 1.0);
    ledger.add("batch_norm", oracle::grad_check(scalarize([=]() mutable {
                                                  return nn::batch_norm(x, gamma, beta, rm, rv, nn::BatchNormOptions{});
                                                }, rng),
                                                {{"x", x}, {"gamma", gamma}, {"beta", beta}}));
    auto em = randn({3}, rng, false);
    auto ev = T64::full({3}, 1.7);
    nn::BatchNormOptions eval_opt;
    eval_opt.training = false;
    ledger.add("batch_norm_eval", oracle::grad_check(scalarize([=]() mutable {
                                                       return nn::batch_norm(x, gamma, beta, em, ev, eval_opt);
                                                     }, rng),
                                                     {{"x", x}, {"gamma", gamma}, {"beta", beta}}));
  }
  {
    // Keep inputs away from the kink so the central difference is valid.
    auto x = randn({3, 4, 5}, rng);
    for (auto& v : x.data())
      if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
    ledger.add("relu", oracle::grad_check(scalarize([=] { return nn::relu(x); }, rng), {{"x", x}}));
  }
  {
    auto x = randn({3, 2, 4, 5}, rng);
    ledger.add("global_avg_pool", oracle::grad_check(scalarize([=] { return nn::global_avg_pool(x); }, rng), {{"x", x}}));
  }
  {
    auto a = randn({2, 3, 4}, rng);
    auto b = randn({2, 2, 4}, rng);
    ledger.add("concat", oracle::grad_check(scalarize([=] { return nn::concat<double>({a, b}, 1); }, rng), {{"a", a}, {"b", b}}));
    ledger.add("reshape", oracle::grad_check(scalarize([=] { return nn::reshape(a, {4, 6}); }, rng), {{"a", a}}));
    ledger.add("take_rows", oracle::grad_check(scalarize([=] { return nn::take_rows(a, {1, 0, 1}); }, rng), {{"a", a}}));
  }
  {
    auto x = randn({4, 6}, rng);
    auto w = randn({3, 6}, rng);
    auto b = randn({3}, rng);
    ledger.add("linear", oracle::grad_check(scalarize([=] { return nn::linear(x, w, b); }, rng), {{"x", x}, {"W", w}, {"b", b}}));
    ledger.add("l2_normalize", oracle::grad_check(scalarize([=] { return nn::l2_normalize(x); }, rng), {{"x", x}}));
    ledger.add("sum", oracle::grad_check([=] { return nn::sum(x); }, {{"x", x}}));
    ledger.add("sum_squares", oracle::grad_check([=] { return nn::sum_squares(x); }, {{"x", x}}));
  }
  {
    auto e = randn({8, 5}, rng);
    const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
    ledger.add("triplet_loss", oracle::grad_check([=] { return fusion::triplet_loss(e, labels, 0.5); }, {{"embeddings", e}}));
  }
}

void model_check(GradLedger& ledger, const std::string& name, model::ModelConfig cfg, std::uint64_t seed) {
  constexpr int V = 3, F = 8, L = 12, B = 4;
  cfg.stream.joints = cfg.reference.joints = V;
  cfg.stream.scales = F;
  cfg.stream.length = L;
  cfg.stream.c_stem1 = 3;
  cfg.stream.c_stem2 = 4;
  cfg.stream.c_branch = 3;
  cfg.reference.channels = {6, 6};
  cfg.reference.kernel = 3;
  cfg.reference.feature_dim = 16;
  model::GaitModel<double> model(cfg, seed);
  Rng rng(derive_seed(seed, 0x9c));
  model::ModelInput<double> input;
  if (cfg.use_stream) input.planes = randn({B * V * 2, 1, F, L}, rng);
  if (cfg.backbone != "none") input.sequences = randn({B, 2 * V, 1, L + 1}, rng);
  const std::vector<int> labels{0, 0, 1, 1};
  // A wide margin keeps every hinge active so each parameter is exercised.
  auto loss = [&] { return fusion::triplet_loss(model.embed(input, true), labels, 0.5); };
  std::vector<std::pair<std::string, T64>> wrt;
  for (const auto& e : model.params().trainable()) wrt.emplace_back(e.name, e.tensor);
  if (input.planes.defined()) wrt.emplace_back("planes", input.planes);
  ledger.add(name, oracle::grad_check(loss, wrt, 12, seed));
}

}  // namespace

SuiteResult cwt_equivalence(int signals, int length, int scales, std::uint64_t seed, double tolerance) {
  SuiteResult r;
  r.name = "cwt_equivalence";
  Rng rng(seed);
  double worst = 0.0;
  for (auto kind : {cwt::WaveletKind::Morlet, cwt::WaveletKind::MexicanHat, cwt::WaveletKind::Gaussian1,
                    cwt::WaveletKind::Shannon}) {
    const auto w = cwt::MotherWavelet::make(kind);
    const auto grid = cwt::make_scale_grid(scales, 3.0, 30.0, w);
    cwt::CwtKernelTable table(grid, w, length);
    for (int s = 0; s < signals; ++s) {
      std::vector<double> v(length);
      for (auto& x : v) x = rng.normal();
      const auto fast = table.transform(v);
      const auto direct = cwt::cwt_direct(v, grid, w);
      for (std::size_t i = 0; i < fast.coef.size(); ++i) worst = std::max(worst, std::abs(fast.coef[i] - direct.coef[i]));
    }
  }
  r.metric = worst;
  r.passed = worst < tolerance;
  r.detail = std::to_string(signals) + " signals x 4 wavelets, max |fast - direct| = " + fmt("%.3g", worst);
  return r;
}

SuiteResult gradients(std::uint64_t seed, double tolerance) {
  SuiteResult r;
  r.name = "gradients";
  GradLedger ledger;
  layer_checks(ledger, seed);
  model::ModelConfig stream_only;
  stream_only.backbone = "none";
  model_check(ledger, "stream+fusion+triplet", stream_only, seed);
  model::ModelConfig per_joint = stream_only;
  per_joint.stream.share_weights_across_joints = false;
  model_check(ledger, "per-joint stream", per_joint, seed + 1);
  model_check(ledger, "fused backbone+stream", model::ModelConfig{}, seed + 2);
  r.metric = ledger.worst;
  r.passed = ledger.worst < tolerance;
  r.detail = std::to_string(ledger.coords) + " coordinates (" + std::to_string(ledger.retried) +
             " re-probed at smaller steps), worst relative error " + fmt("%.3g", ledger.worst) + " (" +
             ledger.worst_name + ")";
  return r;
}

SuiteResult mining(int batches, int P, int K, std::uint64_t seed) {
  SuiteResult r;
  r.name = "mining";
  Rng rng(seed);
  int mismatches = 0;
  const int B = P * K;
  for (int b = 0; b < batches; ++b) {
    const bool lattice = b % 4 == 3;
    const int dim = lattice ? 2 : 8;
    std::vector<int> labels;
    for (int p = 0; p < P; ++p)
      for (int k = 0; k < K; ++k) labels.push_back(static_cast<int>(p * 7 + b % 3));
    rng.shuffle(labels);
    std::vector<double> emb(static_cast<std::size_t>(B) * dim);
    // Lattice points in {0,1,2}^2 make equal distances common.
    for (auto& v : emb) v = lattice ? static_cast<double>(rng.below(3)) : rng.normal();
    if (fusion::mine_hard_triplets(emb, dim, labels) != oracle::brute_force_triplets(emb, dim, labels)) ++mismatches;
  }
  {
    // Every embedding identical: all distances tie at zero.
    std::vector<int> labels{0, 0, 1, 1, 2, 2};
    std::vector<double> emb(labels.size() * 3, 0.25);
    if (fusion::mine_hard_triplets(emb, 3, labels) != oracle::brute_force_triplets(emb, 3, labels)) ++mismatches;
  }
  r.metric = mismatches;
  r.passed = mismatches == 0;
  r.detail = std::to_string(batches + 1) + " batches, " + std::to_string(mismatches) + " mismatches";
  return r;
}

namespace {

bool same_report(const eval::EvalReport& a, const eval::EvalReport& b) {
  if (a.cells.size() != b.cells.size() || a.set_means != b.set_means || a.overall_mean != b.overall_mean) return false;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto &x = a.cells[i], &y = b.cells[i];
    if (x.probe_set != y.probe_set || x.angle_deg != y.angle_deg || x.correct != y.correct || x.total != y.total ||
        x.rank1 != y.rank1)
      return false;
  }
  return true;
}

eval::EmbeddingRow random_row(Rng& rng, int subject, int angle, int dim, bool lattice, int serial) {
  eval::EmbeddingRow row;
  // A random prefix decouples sequence_id order from insertion order.
  char id[32];
  std::snprintf(id, sizeof id, "q%05d_%d", static_cast<int>(rng.below(100000)), serial);
  row.sequence_id = id;
  row.subject_id = subject;
  row.angle_deg = angle;
  row.embedding.resize(dim);
  for (auto& v : row.embedding) v = lattice ? static_cast<double>(rng.below(2)) : rng.normal();
  return row;
}

}  // namespace

SuiteResult rank1(int datasets, int max_sequences, std::uint64_t seed) {
  SuiteResult r;
  r.name = "rank1";
  Rng rng(seed);
  int mismatches = 0;
  for (int d = 0; d < datasets; ++d) {
    const bool lattice = d % 2 == 1;
    const int dim = lattice ? 3 : 4;
    const int n = 10 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_sequences - 9)));
    const int subjects = 2 + static_cast<int>(rng.below(12));
    const int n_angles = 1 + static_cast<int>(rng.below(4));
    eval::EmbeddingTable gallery;
    std::vector<eval::ProbeSet> probes{{"A", {}}, {"B", {}}};
    for (int i = 0; i < n; ++i) {
      const int subject = 1 + static_cast<int>(rng.below(subjects));
      const int angle = 18 * static_cast<int>(rng.below(n_angles));
      auto row = random_row(rng, subject, angle, dim, lattice, i);
      const auto role = rng.below(3);
      if (role == 0) gallery.push_back(std::move(row));
      else probes[role - 1].rows.push_back(std::move(row));
    }
    if (gallery.empty() || probes[0].rows.empty() || probes[1].rows.empty()) continue;
    for (bool exclude : {false, true}) {
      bool lib_failed = false, ref_failed = false;
      eval::EvalReport lib, ref;
      try {
        lib = eval::rank1_eval(gallery, probes, exclude);
      } catch (const Error&) {
        lib_failed = true;
      }
      try {
        ref = oracle::brute_force_rank1(gallery, probes, exclude);
      } catch (const Error&) {
        ref_failed = true;
      }
      if (lib_failed != ref_failed || (!lib_failed && !same_report(lib, ref))) ++mismatches;
    }
  }
  r.metric = mismatches;
  r.passed = mismatches == 0;
  r.detail = std::to_string(datasets) + " datasets, " + std::to_string(mismatches) + " mismatches";
  return r;
}

SuiteResult chance_rank1(int subjects, int trials, std::uint64_t seed, double tolerance_pct) {
  SuiteResult r;
  r.name = "chance_rank1";
  Rng rng(seed);
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    eval::EmbeddingTable gallery;
    std::vector<eval::ProbeSet> probes{{"probe", {}}};
    for (int s = 1; s <= subjects; ++s) {
      gallery.push_back(random_row(rng, s, 0, 16, false, 2 * s));
      probes[0].rows.push_back(random_row(rng, s, 0, 16, false, 2 * s + 1));
    }
    total += eval::rank1_eval(gallery, probes, false).overall_mean;
  }
  const double mean = total / trials;
  const double expected = 100.0 / subjects;
  r.metric = mean;
  r.passed = std::abs(mean - expected) <= tolerance_pct;
  r.detail = "mean rank-1 " + fmt("%.3f", mean) + "% vs chance " + fmt("%.3f", expected) + "%";
  return r;
}

std::vector<SuiteResult> run_all(std::uint64_t seed) {
  return {cwt_equivalence(50, 59, 64, seed), gradients(seed), mining(50, 8, 4, seed), rank1(20, 200, seed),
          chance_rank1(50, 200, seed, 1.5)};
}

}  // namespace gaitwave::selfcheck
