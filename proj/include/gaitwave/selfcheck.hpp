#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gaitwave::selfcheck {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double metric = 0.0;
};

/// cwt_fast against cwt_direct for every real-valued wavelet code;
/// metric is the max |difference| of the complex coefficients.
SuiteResult cwt_equivalence(int signals, int length, int scales, std::uint64_t seed, double tolerance = 1e-6);

/// Finite-difference checks of every layer, then the wavelet stream with
/// the fusion head and triplet loss on a V=3, F=8, L=12 model, in double.
/// metric is the worst relative error seen.
SuiteResult gradients(std::uint64_t seed, double tolerance = 1e-4);

/// mine_hard_triplets against exhaustive search over P x K batches, plus
/// lattice batches with many exact distance ties.
SuiteResult mining(int batches, int P, int K, std::uint64_t seed);

/// rank1_eval against exhaustive nearest-neighbour search on random
/// datasets of at most max_sequences rows, half of them with tied distances.
SuiteResult rank1(int datasets, int max_sequences, std::uint64_t seed);

/// Mean rank-1 over `trials` random-embedding datasets with one gallery and
/// one probe sequence per subject; metric is that mean in percent.
SuiteResult chance_rank1(int subjects, int trials, std::uint64_t seed, double tolerance_pct);

/// The suites run by `gaitwave selfcheck`, sized to finish in seconds.
std::vector<SuiteResult> run_all(std::uint64_t seed = 1);

}  // namespace gaitwave::selfcheck
