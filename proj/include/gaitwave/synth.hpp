#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gaitwave/skeleton.hpp"

namespace gaitwave::skeleton {

/// Parameters of the synthetic-gait generator. Each joint of subject s traces
///   x(t) = A[s,j] * sin(2*pi*t / P[s] + phi[s,j]) + base[j]   (and likewise y)
/// with a per-subject cadence P[s]; each sequence scales the amplitudes by a
/// factor in [1 - amp_jitter, 1 + amp_jitter], offsets phases by at most
/// phase_jitter radians, and adds N(0, noise_sigma^2) coordinate noise.
struct SynthConfig {
  int n_subjects = 16;
  int sequences_per_subject = 8;
  int frames = 60;
  int joints = kCocoJoints;
  double cadence_min = 8.0;
  double cadence_max = 24.0;
  double amp_jitter = 0.05;
  double phase_jitter = 0.1;
  double noise_sigma = 0.01;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);

/// COCO-17 stick figure in normalized image coordinates (y grows downward).
struct JointTemplate {
  double x, y;
  double motion;  // relative swing amplitude
};
extern const std::array<JointTemplate, kCocoJoints> kCocoTemplate;

/// Cadences are stratified over the log-range so that no two subjects share
/// a period: subject slot k draws uniformly from the middle half of bin k,
/// and slots are assigned to subjects by a seeded permutation.
std::vector<double> subject_cadences(const SynthConfig& cfg);

/// Sequences ordered by subject, then by sequence index; ids "s003_q05".
std::vector<SkeletonSequence> generate_synthetic(const SynthConfig& cfg);

/// Writes one CSV per sequence plus `manifest.csv` into out_dir.
DatasetManifest write_synthetic(const std::vector<SkeletonSequence>& seqs, const std::filesystem::path& out_dir);

}  // namespace gaitwave::skeleton
