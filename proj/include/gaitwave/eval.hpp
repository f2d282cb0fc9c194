#pragma once

#include <climits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gaitwave/skeleton.hpp"

namespace gaitwave::eval {

struct EmbeddingRow {
  std::string sequence_id;
  int subject_id = 0;
  skeleton::Condition condition = skeleton::Condition::SYNTH;
  int angle_deg = 0;
  std::vector<double> embedding;
};

using EmbeddingTable = std::vector<EmbeddingRow>;

struct ProbeSet {
  std::string name;
  EmbeddingTable rows;
};

struct Rank1Cell {
  std::string probe_set;
  int angle_deg = 0;
  int correct = 0;
  int total = 0;
  double rank1 = 0.0;  // percent
};

struct EvalReport {
  std::vector<Rank1Cell> cells;                         // per (probe set, angle), angles ascending
  std::vector<std::pair<std::string, double>> set_means;  // mean over the set's angles
  double overall_mean = 0.0;                            // mean of the set means

  double set_mean(const std::string& name) const;
};

double euclidean(const std::vector<double>& a, const std::vector<double>& b);

/// Nearest-gallery-neighbour identification. With exclude_identical_view the
/// gallery entries at the probe's angle are removed first; distance ties go to
/// the smallest sequence_id. Throws EmptyCandidateSet when nothing is left.
EvalReport rank1_eval(const EmbeddingTable& gallery, const std::vector<ProbeSet>& probes, bool exclude_identical_view);

/// `probe_set,angle,rank1` rows, then `<set>,mean,<v>` and `overall,mean,<v>`.
/// A non-empty comment is written first as a `# ` line.
std::string format_report(const EvalReport& report, const std::string& comment = "");

/// Picks manifest entries by condition and per-(subject, condition, angle) ordinal.
struct Selector {
  std::optional<skeleton::Condition> condition;
  int ordinal_min = 1;
  int ordinal_max = INT_MAX;

  bool matches(const skeleton::ManifestEntry& e) const;
};

struct EvalProtocol {
  std::string name;
  /// When set, subjects <= this id train and the rest are evaluated;
  /// otherwise every subject appears in both roles.
  std::optional<int> train_subjects_upto;
  Selector train;
  Selector gallery;
  std::vector<std::pair<std::string, Selector>> probe_sets;
  bool exclude_identical_view = true;
};

/// Ordinals 1..n-holdout train and form the gallery; held-out ordinal k is
/// probe set "split<k>". All synthetic angles are 0, so identical-view
/// exclusion is off.
EvalProtocol synthetic_protocol(int sequences_per_subject, int holdout);

/// Subjects 1-74 train; for 75-124, NM#1-4 is the gallery and NM#5-6,
/// BG#1-2, CL#1-2 are the probe sets, identical view excluded.
EvalProtocol casia_b_protocol();

struct ProtocolSplit {
  std::vector<int> train;
  std::vector<int> gallery;
  std::vector<std::pair<std::string, std::vector<int>>> probes;
};

/// Resolves a protocol to manifest indices; throws InvalidConfig for an empty
/// role, overlapping gallery/probe sets, or a probe subject missing from the gallery.
ProtocolSplit apply_protocol(const skeleton::DatasetManifest& manifest, const EvalProtocol& protocol);

}  // namespace gaitwave::eval
