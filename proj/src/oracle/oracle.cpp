#include "gaitwave/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "gaitwave/error.hpp"
#include "gaitwave/rng.hpp"

namespace gaitwave::oracle {

std::vector<double> naive_conv2d(const std::vector<double>& x, const nn::Shape& xs, const std::vector<double>& w,
                                 const nn::Shape& ws, const nn::Conv2dOptions& opt, nn::Shape* out_shape) {
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int Co = ws[0], kh = ws[2], kw = ws[3];
  const int Ho = (H + 2 * opt.pad_h - kh) / opt.stride_h + 1;
  const int Wo = (W + 2 * opt.pad_w - kw) / opt.stride_w + 1;
  const auto X = [&](int n, int c, int y, int z) -> double {
    if (y < 0 || y >= H || z < 0 || z >= W) return 0.0;
    return x[((static_cast<std::size_t>(n) * C + c) * H + y) * W + z];
  };
  std::vector<double> out(static_cast<std::size_t>(N) * Co * Ho * Wo, 0.0);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < Co; ++o)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx)
                acc += w[((static_cast<std::size_t>(o) * C + c) * kh + ky) * kw + kx] *
                       X(n, c, oy * opt.stride_h - opt.pad_h + ky, ox * opt.stride_w - opt.pad_w + kx);
          out[((static_cast<std::size_t>(n) * Co + o) * Ho + oy) * Wo + ox] = acc;
        }
  if (out_shape) *out_shape = {N, Co, Ho, Wo};
  return out;
}

namespace {

double dist(const std::vector<double>& e, int dim, int a, int b) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = e[static_cast<std::size_t>(a) * dim + d] - e[static_cast<std::size_t>(b) * dim + d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<fusion::Triplet> brute_force_triplets(const std::vector<double>& emb, int dim, const std::vector<int>& labels) {
  const int B = static_cast<int>(labels.size());
  std::vector<fusion::Triplet> out;
  for (int a = 0; a < B; ++a) {
    std::tuple<double, int, double, int> best{0.0, -1, 0.0, -1};
    bool found = false;
    for (int p = 0; p < B; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (int n = 0; n < B; ++n) {
        if (labels[n] == labels[a]) continue;
        const std::tuple<double, int, double, int> key{-dist(emb, dim, a, p), p, dist(emb, dim, a, n), n};
        if (!found || key < best) best = key;
        found = true;
      }
    }
    if (!found) fail(ErrorKind::DegenerateBatch, "anchor without positive or negative");
    out.push_back({a, std::get<1>(best), std::get<3>(best)});
  }
  return out;
}

eval::EvalReport brute_force_rank1(const eval::EmbeddingTable& gallery, const std::vector<eval::ProbeSet>& probes,
                                   bool exclude) {
  eval::EvalReport report;
  for (const auto& set : probes) {
    std::map<int, std::pair<int, int>> tally;
    for (const auto& probe : set.rows) {
      std::vector<std::tuple<double, std::string, int>> ranked;
      for (const auto& g : gallery) {
        if (exclude && g.angle_deg == probe.angle_deg) continue;
        double s = 0.0;
        for (std::size_t d = 0; d < g.embedding.size(); ++d)
          s += (g.embedding[d] - probe.embedding[d]) * (g.embedding[d] - probe.embedding[d]);
        ranked.emplace_back(std::sqrt(s), g.sequence_id, g.subject_id);
      }
      if (ranked.empty()) fail(ErrorKind::EmptyCandidateSet, "no candidate for " + probe.sequence_id);
      std::sort(ranked.begin(), ranked.end());
      auto& [hit, total] = tally[probe.angle_deg];
      hit += std::get<2>(ranked.front()) == probe.subject_id;
      ++total;
    }
    double acc = 0.0;
    for (const auto& [angle, ht] : tally) {
      const double r = 100.0 * ht.first / ht.second;
      report.cells.push_back({set.name, angle, ht.first, ht.second, r});
      acc += r;
    }
    report.set_means.emplace_back(set.name, acc / static_cast<double>(tally.size()));
  }
  double total = 0.0;
  for (const auto& sm : report.set_means) total += sm.second;
  report.overall_mean = report.set_means.empty() ? 0.0 : total / static_cast<double>(report.set_means.size());
  return report;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

std::vector<GradCheckResult> grad_check(const std::function<nn::Tensor<double>()>& loss,
                                        const std::vector<std::pair<std::string, nn::Tensor<double>>>& wrt,
                                        std::size_t max_per_tensor, std::uint64_t seed, double h,
                                        double retry_above) {
  for (const auto& [name, t] : wrt) {
    auto copy = t;
    copy.zero_grad();
  }
  const auto out = loss();
  nn::backward(out);
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : wrt) {
    auto copy = t;
    auto g = copy.has_grad() ? copy.grad() : std::span<double>{};
    std::vector<double> a(t.numel(), 0.0);
    std::copy(g.begin(), g.end(), a.begin());
    analytic.push_back(std::move(a));
  }

  Rng rng(seed);
  std::vector<GradCheckResult> results;
  nn::NoGradGuard guard;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    auto t = wrt[k].second;
    const std::size_t n = t.numel();
    std::vector<std::size_t> coords;
    if (n <= max_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      coords = {0, n - 1};
      while (coords.size() < max_per_tensor) coords.push_back(static_cast<std::size_t>(rng.below(n)));
    }
    GradCheckResult r{wrt[k].first};
    for (std::size_t i : coords) {
      auto data = t.data();
      const double saved = data[i];
      const auto central = [&](double step) {
        data[i] = saved + step;
        const double up = loss().item();
        data[i] = saved - step;
        const double down = loss().item();
        data[i] = saved;
        return (up - down) / (2.0 * step);
      };
      double numeric = central(h);
      double err = relative_error(analytic[k][i], numeric);
      if (err >= retry_above) {
        // A ReLU or hinge kink inside [x-h, x+h] corrupts the central
        // difference; a genuine gradient error persists at smaller steps.
        ++r.retried;
        for (double step : {h / 3.0, h / 10.0}) {
          const double n2 = central(step);
          const double e2 = relative_error(analytic[k][i], n2);
          if (e2 < err) {
            err = e2;
            numeric = n2;
          }
        }
      }
      if (err >= r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_analytic = analytic[k][i];
        r.worst_numeric = numeric;
      }
      ++r.checked;
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace gaitwave::oracle
