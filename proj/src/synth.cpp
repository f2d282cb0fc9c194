#include "gaitwave/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "gaitwave/error.hpp"
#include "gaitwave/rng.hpp"

namespace gaitwave::skeleton {

const std::array<JointTemplate, kCocoJoints> kCocoTemplate = {{
    {0.500, 0.140, 0.20},  // nose
    {0.485, 0.125, 0.20},  // left eye
    {0.515, 0.125, 0.20},  // right eye
    {0.470, 0.135, 0.20},  // left ear
    {0.530, 0.135, 0.20},  // right ear
    {0.440, 0.250, 0.35},  // left shoulder
    {0.560, 0.250, 0.35},  // right shoulder
    {0.420, 0.370, 0.65},  // left elbow
    {0.580, 0.370, 0.65},  // right elbow
    {0.410, 0.480, 1.00},  // left wrist
    {0.590, 0.480, 1.00},  // right wrist
    {0.460, 0.500, 0.30},  // left hip
    {0.540, 0.500, 0.30},  // right hip
    {0.455, 0.680, 0.70},  // left knee
    {0.545, 0.680, 0.70},  // right knee
    {0.450, 0.860, 1.00},  // left ankle
    {0.550, 0.860, 1.00},  // right ankle
}};

namespace {

constexpr double kAmplitudeX = 0.12;
constexpr double kAmplitudeY = 0.04;

constexpr std::uint64_t kProfileStream = 1;
constexpr std::uint64_t kCadenceStream = 2;
constexpr std::uint64_t kSequenceStream = 3;

JointTemplate template_joint(int j) {
  if (j < kCocoJoints) return kCocoTemplate[j];
  // Extra joints beyond COCO-17 reuse the template, nudged sideways.
  auto base = kCocoTemplate[j % kCocoJoints];
  base.x += 0.01 * (j / kCocoJoints);
  return base;
}

struct SubjectProfile {
  double period;
  std::vector<double> amp;    // [axis][joint]
  std::vector<double> phase;  // [axis][joint]
};

}  // namespace

void validate(const SynthConfig& cfg) {
  auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, "synthetic config: " + what); };
  if (cfg.n_subjects < 1) bad("n_subjects must be >= 1");
  if (cfg.sequences_per_subject < 1) bad("sequences_per_subject must be >= 1");
  if (cfg.frames < 2) bad("frames must be >= 2");
  if (cfg.joints < 1) bad("joints must be >= 1");
  if (!(cfg.cadence_min >= 3.0) || !(cfg.cadence_max <= cfg.frames / 2.0) || !(cfg.cadence_min <= cfg.cadence_max))
    bad("cadence range must satisfy 3 <= min <= max <= frames/2");
  if (!(cfg.noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (!(cfg.amp_jitter >= 0.0) || !(cfg.phase_jitter >= 0.0)) bad("jitters must be >= 0");
}

std::vector<double> subject_cadences(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, kCadenceStream));
  const int n = cfg.n_subjects;
  std::vector<int> slots(n);
  for (int i = 0; i < n; ++i) slots[i] = i;
  rng.shuffle(slots);
  const double lo = std::log(cfg.cadence_min);
  const double width = std::log(cfg.cadence_max) - lo;
  std::vector<double> periods(n);
  for (int s = 0; s < n; ++s) {
    const double u = 0.25 + 0.5 * rng.uniform();
    periods[s] = std::exp(lo + width * (slots[s] + u) / n);
  }
  return periods;
}

std::vector<SkeletonSequence> generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  const int T = cfg.frames;
  const int V = cfg.joints;
  const auto periods = subject_cadences(cfg);

  Rng profile_rng(derive_seed(cfg.seed, kProfileStream));
  std::vector<SubjectProfile> profiles(cfg.n_subjects);
  for (int s = 0; s < cfg.n_subjects; ++s) {
    auto& p = profiles[s];
    p.period = periods[s];
    p.amp.resize(static_cast<std::size_t>(kAxes) * V);
    p.phase.resize(static_cast<std::size_t>(kAxes) * V);
    for (int a = 0; a < kAxes; ++a)
      for (int j = 0; j < V; ++j) {
        const double base_amp = a == 0 ? kAmplitudeX : kAmplitudeY;
        p.amp[a * V + j] = base_amp * template_joint(j).motion * profile_rng.uniform(0.5, 1.5);
        p.phase[a * V + j] = profile_rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
  }

  std::vector<SkeletonSequence> out;
  out.reserve(static_cast<std::size_t>(cfg.n_subjects) * cfg.sequences_per_subject);
  for (int s = 0; s < cfg.n_subjects; ++s) {
    const auto& p = profiles[s];
    for (int q = 0; q < cfg.sequences_per_subject; ++q) {
      Rng rng(derive_seed(derive_seed(cfg.seed, kSequenceStream), (static_cast<std::uint64_t>(s) << 20) | q));
      std::vector<double> amp(p.amp.size()), phase(p.phase.size());
      for (std::size_t k = 0; k < amp.size(); ++k) {
        amp[k] = p.amp[k] * (1.0 + cfg.amp_jitter * rng.uniform(-1.0, 1.0));
        phase[k] = p.phase[k] + cfg.phase_jitter * rng.uniform(-1.0, 1.0);
      }
      std::vector<double> coords(static_cast<std::size_t>(kAxes) * T * V);
      for (int a = 0; a < kAxes; ++a)
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < V; ++j) {
            const auto tj = template_joint(j);
            const double base = a == 0 ? tj.x : tj.y;
            const double w = 2.0 * std::numbers::pi * t / p.period;
            double c = amp[a * V + j] * std::sin(w + phase[a * V + j]) + base;
            if (cfg.noise_sigma > 0.0) c += cfg.noise_sigma * rng.normal();
            coords[(static_cast<std::size_t>(a) * T + t) * V + j] = c;
          }
      char id[32];
      std::snprintf(id, sizeof id, "s%03d_q%02d", s + 1, q + 1);
      SequenceMeta meta{s + 1, Condition::SYNTH, 0, id};
      out.emplace_back(T, V, std::move(coords), std::move(meta));
    }
  }
  return out;
}

DatasetManifest write_synthetic(const std::vector<SkeletonSequence>& seqs, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    fail(ErrorKind::Io, "cannot create output directory " + out_dir.string());
  DatasetManifest m;
  for (const auto& seq : seqs) {
    const auto path = out_dir / (seq.meta().sequence_id + ".csv");
    save_sequence(seq, path);
    ManifestEntry e;
    e.path = path;
    e.subject_id = seq.meta().subject_id;
    e.condition = seq.meta().condition;
    e.angle_deg = seq.meta().angle_deg;
    e.sequence_id = seq.meta().sequence_id;
    m.entries.push_back(std::move(e));
  }
  finalize_manifest(m);
  save_manifest(m, out_dir / "manifest.csv");
  return m;
}

}  // namespace gaitwave::skeleton
