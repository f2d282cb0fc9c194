#include "gaitwave/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gaitwave/error.hpp"
#include "gaitwave/io.hpp"

namespace gaitwave::skeleton {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::NM: return "NM";
    case Condition::BG: return "BG";
    case Condition::CL: return "CL";
    case Condition::SYNTH: return "SYNTH";
  }
  return "SYNTH";
}

Condition parse_condition(std::string_view text) {
  if (text == "NM") return Condition::NM;
  if (text == "BG") return Condition::BG;
  if (text == "CL") return Condition::CL;
  if (text == "SYNTH") return Condition::SYNTH;
  fail(ErrorKind::MalformedFile, "unknown condition '" + std::string(text) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Gallery: return "gallery";
    case Split::Probe: return "probe";
  }
  return "train";
}

SkeletonSequence::SkeletonSequence(int frames, int joints, std::vector<double> coords, SequenceMeta meta)
    : frames_(frames), joints_(joints), coords_(std::move(coords)), meta_(std::move(meta)) {
  if (frames_ < 2) fail(ErrorKind::DegenerateSequence, "a sequence needs at least two frames");
  if (joints_ < 1) fail(ErrorKind::ShapeMismatch, "a sequence needs at least one joint");
  if (coords_.size() != static_cast<std::size_t>(kAxes) * frames_ * joints_)
    fail(ErrorKind::ShapeMismatch, "coordinate buffer does not match 2 x T x V");
  for (double c : coords_)
    if (!std::isfinite(c)) fail(ErrorKind::NonFiniteCoordinate, "sequence '" + meta_.sequence_id + "'");
}

SkeletonSequence SkeletonSequence::with_coords(int frames, std::vector<double> coords) const {
  return SkeletonSequence(frames, joints_, std::move(coords), meta_);
}

SkeletonSequence SkeletonSequence::with_meta(SequenceMeta meta) const {
  return SkeletonSequence(frames_, joints_, coords_, std::move(meta));
}

std::vector<double> VelocityField::signal(int axis, int j) const {
  std::vector<double> out(frames);
  for (int t = 0; t < frames; ++t) out[t] = at(axis, t, j);
  return out;
}

SkeletonSequence parse_sequence(std::string_view text, SequenceMeta meta, std::string_view origin) {
  const std::string where(origin);
  const auto rows = io::lines(text);
  if (rows.empty() || rows.front() != "frame,joint,x,y")
    fail(ErrorKind::MalformedFile, where + ": header must be 'frame,joint,x,y'");

  struct Row {
    long long frame, joint;
    double x, y;
  };
  std::vector<Row> parsed;
  parsed.reserve(rows.size());
  long long max_frame = -1, max_joint = -1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split(rows[i], ',');
    Row r{};
    if (f.size() != 4 || !io::parse_int(f[0], r.frame) || !io::parse_int(f[1], r.joint))
      fail(ErrorKind::MalformedFile, where + ": bad row " + std::to_string(i + 1));
    if (!io::parse_double(f[2], r.x) || !io::parse_double(f[3], r.y))
      fail(ErrorKind::MalformedFile, where + ": bad coordinate on row " + std::to_string(i + 1));
    if (!std::isfinite(r.x) || !std::isfinite(r.y))
      fail(ErrorKind::NonFiniteCoordinate, where + ": row " + std::to_string(i + 1));
    if (r.frame < 0 || r.joint < 0) fail(ErrorKind::MalformedFile, where + ": negative index on row " + std::to_string(i + 1));
    max_frame = std::max(max_frame, r.frame);
    max_joint = std::max(max_joint, r.joint);
    parsed.push_back(r);
  }
  if (parsed.empty()) fail(ErrorKind::MalformedFile, where + ": no rows");

  std::set<long long> frames_seen;
  for (const auto& r : parsed) frames_seen.insert(r.frame);
  if (static_cast<long long>(frames_seen.size()) != max_frame + 1) {
    for (long long t = 0; t <= max_frame; ++t)
      if (!frames_seen.contains(t)) fail(ErrorKind::FrameGap, where + ": frame " + std::to_string(t) + " missing");
  }
  const int frames = static_cast<int>(max_frame + 1);
  const int joints = static_cast<int>(max_joint + 1);
  if (parsed.size() != static_cast<std::size_t>(frames) * joints)
    fail(ErrorKind::MalformedFile, where + ": expected " + std::to_string(frames * joints) + " rows, found " +
                                       std::to_string(parsed.size()));

  std::vector<double> coords(static_cast<std::size_t>(kAxes) * frames * joints, 0.0);
  std::vector<char> filled(static_cast<std::size_t>(frames) * joints, 0);
  for (const auto& r : parsed) {
    const auto cell = static_cast<std::size_t>(r.frame) * joints + r.joint;
    if (filled[cell]) fail(ErrorKind::MalformedFile, where + ": duplicate (frame, joint) row");
    filled[cell] = 1;
    coords[cell] = r.x;
    coords[static_cast<std::size_t>(frames) * joints + cell] = r.y;
  }
  if (frames < 2) fail(ErrorKind::MalformedFile, where + ": need at least two frames");
  if (meta.sequence_id.empty()) meta.sequence_id = where;
  return SkeletonSequence(frames, joints, std::move(coords), std::move(meta));
}

SkeletonSequence load_sequence(const std::filesystem::path& path, SequenceMeta meta) {
  if (meta.sequence_id.empty()) meta.sequence_id = path.stem().string();
  return parse_sequence(io::read_file(path), std::move(meta), path.string());
}

std::string format_sequence(const SkeletonSequence& seq) {
  std::string out = "frame,joint,x,y\n";
  out.reserve(static_cast<std::size_t>(seq.frames()) * seq.joints() * 48);
  for (int t = 0; t < seq.frames(); ++t) {
    for (int j = 0; j < seq.joints(); ++j) {
      out += std::to_string(t);
      out += ',';
      out += std::to_string(j);
      out += ',';
      out += io::format_double(seq.at(0, t, j));
      out += ',';
      out += io::format_double(seq.at(1, t, j));
      out += '\n';
    }
  }
  return out;
}

void save_sequence(const SkeletonSequence& seq, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_sequence(seq));
}

SkeletonSequence preprocess(const SkeletonSequence& seq) {
  const int T = seq.frames();
  const int V = seq.joints();
  std::vector<double> out(seq.coords().begin(), seq.coords().end());
  double spread_sum = 0.0;
  for (int t = 0; t < T; ++t) {
    double sq = 0.0;
    for (int a = 0; a < kAxes; ++a) {
      double mean = 0.0;
      for (int j = 0; j < V; ++j) mean += seq.at(a, t, j);
      mean /= V;
      for (int j = 0; j < V; ++j) {
        const double c = seq.at(a, t, j) - mean;
        out[seq.index(a, t, j)] = c;
        sq += c * c;
      }
    }
    spread_sum += std::sqrt(sq / (kAxes * V));
  }
  const double scale = spread_sum / T;
  if (!(scale >= 1e-9))
    fail(ErrorKind::DegenerateSequence, "sequence '" + seq.meta().sequence_id + "' has all joints coincident");
  for (double& c : out) c /= scale;
  return seq.with_coords(T, std::move(out));
}

VelocityField compute_velocity(const SkeletonSequence& seq) {
  VelocityField v;
  v.frames = seq.frames() - 1;
  v.joints = seq.joints();
  v.vel.resize(static_cast<std::size_t>(kAxes) * v.frames * v.joints);
  for (int a = 0; a < kAxes; ++a)
    for (int t = 0; t < v.frames; ++t)
      for (int j = 0; j < v.joints; ++j)
        v.vel[(static_cast<std::size_t>(a) * v.frames + t) * v.joints + j] = seq.at(a, t + 1, j) - seq.at(a, t, j);
  return v;
}

int clip_offset(int frames, int target, ClipMode mode, Rng& rng) {
  if (frames <= target) return 0;
  const int slack = frames - target;
  if (mode == ClipMode::Eval) return slack / 2;
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(slack) + 1));
}

SkeletonSequence clip_window(const SkeletonSequence& seq, int target, int offset) {
  if (target < 2) fail(ErrorKind::InvalidRange, "clip length must be at least 2");
  const int T = seq.frames();
  const int V = seq.joints();
  if (offset < 0 || (T > target && offset > T - target)) fail(ErrorKind::InvalidRange, "clip offset out of range");
  if (T <= target) offset = 0;
  std::vector<double> out(static_cast<std::size_t>(kAxes) * target * V);
  for (int a = 0; a < kAxes; ++a)
    for (int t = 0; t < target; ++t) {
      const int src = std::min(offset + t, T - 1);
      for (int j = 0; j < V; ++j) out[(static_cast<std::size_t>(a) * target + t) * V + j] = seq.at(a, src, j);
    }
  return seq.with_coords(target, std::move(out));
}

SkeletonSequence clip_to_length(const SkeletonSequence& seq, int target, ClipMode mode, Rng& rng) {
  if (target < 2) fail(ErrorKind::InvalidRange, "clip length must be at least 2");
  return clip_window(seq, target, clip_offset(seq.frames(), target, mode, rng));
}

void finalize_manifest(DatasetManifest& manifest) {
  std::set<std::pair<int, std::string>> ids;
  for (const auto& e : manifest.entries)
    if (!ids.emplace(e.subject_id, e.sequence_id).second)
      fail(ErrorKind::MalformedFile, "duplicate (subject_id, sequence_id) in manifest: " + std::to_string(e.subject_id) +
                                         ", " + e.sequence_id);
  std::map<std::tuple<int, Condition, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    groups[{e.subject_id, e.condition, e.angle_deg}].push_back(i);
  }
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return manifest.entries[a].sequence_id < manifest.entries[b].sequence_id;
    });
    for (std::size_t r = 0; r < members.size(); ++r) manifest.entries[members[r]].ordinal = static_cast<int>(r) + 1;
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path, Split split) {
  const std::string text = io::read_file(path);
  const auto rows = io::lines(text);
  const std::string where = path.string();
  if (rows.empty() || rows.front() != "path,subject_id,condition,angle")
    fail(ErrorKind::MalformedFile, where + ": header must be 'path,subject_id,condition,angle'");
  DatasetManifest m;
  m.split = split;
  const auto base = path.parent_path();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split(rows[i], ',');
    long long subject = 0, angle = 0;
    if (f.size() != 4 || f[0].empty() || !io::parse_int(f[1], subject) || !io::parse_int(f[3], angle))
      fail(ErrorKind::MalformedFile, where + ": bad row " + std::to_string(i + 1));
    ManifestEntry e;
    std::filesystem::path p{std::string(f[0])};
    e.path = p.is_absolute() ? p : base / p;
    e.subject_id = static_cast<int>(subject);
    e.condition = parse_condition(f[2]);
    e.angle_deg = static_cast<int>(angle);
    e.sequence_id = p.stem().string();
    if (!std::filesystem::is_regular_file(e.path))
      fail(ErrorKind::Io, where + ": sequence file not found: " + e.path.string());
    m.entries.push_back(std::move(e));
  }
  finalize_manifest(m);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::string out = "path,subject_id,condition,angle\n";
  const auto base = path.parent_path();
  for (const auto& e : manifest.entries) {
    auto rel = e.path.is_absolute() || !base.empty() ? e.path.lexically_relative(base) : e.path;
    if (rel.empty()) rel = e.path;
    out += rel.generic_string();
    out += ',';
    out += std::to_string(e.subject_id);
    out += ',';
    out += to_string(e.condition);
    out += ',';
    out += std::to_string(e.angle_deg);
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

SkeletonSequence load_entry(const ManifestEntry& entry) {
  SequenceMeta meta{entry.subject_id, entry.condition, entry.angle_deg, entry.sequence_id};
  return load_sequence(entry.path, std::move(meta));
}

}  // namespace gaitwave::skeleton
