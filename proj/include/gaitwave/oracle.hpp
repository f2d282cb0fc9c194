#pragma once

// Independent reference implementations used to cross-check the library.
// They favour obviousness over speed and share no code paths with the
// routines they verify.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gaitwave/eval.hpp"
#include "gaitwave/fusion.hpp"
#include "gaitwave/nn/ops.hpp"

namespace gaitwave::oracle {

/// Seven-loop cross-correlation with explicit zero padding, all in double.
std::vector<double> naive_conv2d(const std::vector<double>& x, const nn::Shape& x_shape, const std::vector<double>& w,
                                 const nn::Shape& w_shape, const nn::Conv2dOptions& opt, nn::Shape* out_shape = nullptr);

/// Batch-hard triplets by enumerating every (positive, negative) pair per
/// anchor and taking the lexicographic minimum of
/// (-d(a,p), p, d(a,n), n).
std::vector<fusion::Triplet> brute_force_triplets(const std::vector<double>& embeddings, int dim,
                                                  const std::vector<int>& labels);

/// Rank-1 by sorting every admissible gallery entry on (distance, sequence_id).
eval::EvalReport brute_force_rank1(const eval::EmbeddingTable& gallery, const std::vector<eval::ProbeSet>& probes,
                                   bool exclude_identical_view);

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t retried = 0;  // coordinates re-probed with smaller steps
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central-difference check of d loss / d t for each tensor in `wrt`. The
/// loss closure must rebuild the graph from the current tensor values on
/// every call. At most max_per_tensor coordinates per tensor are probed,
/// chosen with a seeded generator; the first and last are always included.
/// A coordinate whose error reaches retry_above is re-probed at h/3 and
/// h/10 and the smallest error is kept.
std::vector<GradCheckResult> grad_check(const std::function<nn::Tensor<double>()>& loss,
                                        const std::vector<std::pair<std::string, nn::Tensor<double>>>& wrt,
                                        std::size_t max_per_tensor = 64, std::uint64_t seed = 7,
                                        double h = kFiniteDifferenceStep, double retry_above = 1e-4);

}  // namespace gaitwave::oracle
