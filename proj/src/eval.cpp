#include "gaitwave/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gaitwave/error.hpp"
#include "gaitwave/io.hpp"

namespace gaitwave::eval {

double EvalReport::set_mean(const std::string& name) const {
  for (const auto& [set, mean] : set_means)
    if (set == name) return mean;
  fail(ErrorKind::OutOfRange, "report has no probe set " + name);
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "embedding widths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

EvalReport rank1_eval(const EmbeddingTable& gallery, const std::vector<ProbeSet>& probes, bool exclude_identical_view) {
  if (gallery.empty()) fail(ErrorKind::EmptyCandidateSet, "gallery is empty");
  // Candidates in sequence_id order, so a strict < keeps the smallest id on ties.
  std::vector<const EmbeddingRow*> ordered;
  for (const auto& g : gallery) ordered.push_back(&g);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const EmbeddingRow* a, const EmbeddingRow* b) { return a->sequence_id < b->sequence_id; });

  EvalReport report;
  for (const auto& set : probes) {
    if (set.rows.empty()) fail(ErrorKind::EmptyCandidateSet, "probe set " + set.name + " is empty");
    std::map<int, std::pair<int, int>> per_angle;  // angle -> (correct, total)
    for (const auto& probe : set.rows) {
      const EmbeddingRow* best = nullptr;
      double best_d = 0.0;
      for (const auto* cand : ordered) {
        if (exclude_identical_view && cand->angle_deg == probe.angle_deg) continue;
        const double d = euclidean(probe.embedding, cand->embedding);
        if (!best || d < best_d) {
          best = cand;
          best_d = d;
        }
      }
      if (!best)
        fail(ErrorKind::EmptyCandidateSet, "no gallery candidate left for probe " + probe.sequence_id + " at angle " +
                                               std::to_string(probe.angle_deg));
      auto& [correct, total] = per_angle[probe.angle_deg];
      correct += best->subject_id == probe.subject_id ? 1 : 0;
      ++total;
    }
    double sum = 0.0;
    for (const auto& [angle, ct] : per_angle) {
      const double r = 100.0 * ct.first / ct.second;
      report.cells.push_back({set.name, angle, ct.first, ct.second, r});
      sum += r;
    }
    report.set_means.emplace_back(set.name, sum / static_cast<double>(per_angle.size()));
  }
  double total = 0.0;
  for (const auto& [name, mean] : report.set_means) total += mean;
  report.overall_mean = report.set_means.empty() ? 0.0 : total / static_cast<double>(report.set_means.size());
  return report;
}

std::string format_report(const EvalReport& report, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "probe_set,angle,rank1\n";
  for (const auto& c : report.cells)
    out += c.probe_set + "," + std::to_string(c.angle_deg) + "," + io::format_double(c.rank1) + "\n";
  for (const auto& [name, mean] : report.set_means) out += name + ",mean," + io::format_double(mean) + "\n";
  out += "overall,mean," + io::format_double(report.overall_mean) + "\n";
  return out;
}

bool Selector::matches(const skeleton::ManifestEntry& e) const {
  if (condition && e.condition != *condition) return false;
  return e.ordinal >= ordinal_min && e.ordinal <= ordinal_max;
}

EvalProtocol synthetic_protocol(int sequences_per_subject, int holdout) {
  if (holdout < 1 || holdout >= sequences_per_subject)
    fail(ErrorKind::InvalidConfig, "holdout must be in [1, sequences_per_subject)");
  EvalProtocol p;
  p.name = "synthetic";
  const int kept = sequences_per_subject - holdout;
  p.train = {std::nullopt, 1, kept};
  p.gallery = {std::nullopt, 1, kept};
  for (int k = 1; k <= holdout; ++k) p.probe_sets.emplace_back("split" + std::to_string(k), Selector{std::nullopt, kept + k, kept + k});
  p.exclude_identical_view = false;
  return p;
}

EvalProtocol casia_b_protocol() {
  using skeleton::Condition;
  EvalProtocol p;
  p.name = "casia-b";
  p.train_subjects_upto = 74;
  p.train = {};
  p.gallery = {Condition::NM, 1, 4};
  p.probe_sets = {{"NM", {Condition::NM, 5, 6}}, {"BG", {Condition::BG, 1, 2}}, {"CL", {Condition::CL, 1, 2}}};
  p.exclude_identical_view = true;
  return p;
}

ProtocolSplit apply_protocol(const skeleton::DatasetManifest& manifest, const EvalProtocol& protocol) {
  ProtocolSplit split;
  split.probes.resize(protocol.probe_sets.size());
  for (std::size_t k = 0; k < protocol.probe_sets.size(); ++k) split.probes[k].first = protocol.probe_sets[k].first;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const int idx = static_cast<int>(i);
    const bool train_subject = !protocol.train_subjects_upto || e.subject_id <= *protocol.train_subjects_upto;
    const bool eval_subject = !protocol.train_subjects_upto || e.subject_id > *protocol.train_subjects_upto;
    if (train_subject && protocol.train.matches(e)) split.train.push_back(idx);
    if (!eval_subject) continue;
    if (protocol.gallery.matches(e)) split.gallery.push_back(idx);
    for (std::size_t k = 0; k < protocol.probe_sets.size(); ++k)
      if (protocol.probe_sets[k].second.matches(e)) split.probes[k].second.push_back(idx);
  }
  if (split.train.empty()) fail(ErrorKind::InvalidConfig, protocol.name + " protocol: no training sequences");
  if (split.gallery.empty()) fail(ErrorKind::InvalidConfig, protocol.name + " protocol: empty gallery");
  const std::set<int> gallery_idx(split.gallery.begin(), split.gallery.end());
  std::set<int> gallery_subjects;
  for (int i : split.gallery) gallery_subjects.insert(manifest.entries[i].subject_id);
  for (const auto& [name, rows] : split.probes) {
    if (rows.empty()) fail(ErrorKind::InvalidConfig, protocol.name + " protocol: probe set " + name + " is empty");
    for (int i : rows) {
      if (gallery_idx.count(i))
        fail(ErrorKind::InvalidConfig, "sequence " + manifest.entries[i].sequence_id + " is both gallery and probe");
      if (!gallery_subjects.count(manifest.entries[i].subject_id))
        fail(ErrorKind::InvalidConfig, "probe subject " + std::to_string(manifest.entries[i].subject_id) + " has no gallery sequence");
    }
  }
  return split;
}

}  // namespace gaitwave::eval
