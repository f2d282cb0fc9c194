#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaitwave/rng.hpp"

namespace gaitwave::skeleton {

enum class Condition { NM, BG, CL, SYNTH };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view text);

inline constexpr int kAxes = 2;
inline constexpr int kCocoJoints = 17;

struct SequenceMeta {
  int subject_id = 0;
  Condition condition = Condition::SYNTH;
  int angle_deg = 0;
  std::string sequence_id;
};

/// One walking clip: 2D joint coordinates over time, stored axis-major as
/// coords[axis][frame][joint]. Construction validates shape, T >= 2 and
/// finiteness; the object is immutable afterwards.
class SkeletonSequence {
 public:
  SkeletonSequence(int frames, int joints, std::vector<double> coords, SequenceMeta meta = {});

  int frames() const noexcept { return frames_; }
  int joints() const noexcept { return joints_; }
  const SequenceMeta& meta() const noexcept { return meta_; }
  std::span<const double> coords() const noexcept { return coords_; }

  double at(int axis, int t, int j) const noexcept { return coords_[index(axis, t, j)]; }
  std::size_t index(int axis, int t, int j) const noexcept {
    return (static_cast<std::size_t>(axis) * frames_ + t) * joints_ + j;
  }

  SkeletonSequence with_coords(int frames, std::vector<double> coords) const;
  SkeletonSequence with_meta(SequenceMeta meta) const;

 private:
  int frames_;
  int joints_;
  std::vector<double> coords_;
  SequenceMeta meta_;
};

/// vel[axis][t][joint] = coords[axis][t+1][joint] - coords[axis][t][joint].
struct VelocityField {
  int frames = 0;  // source T - 1
  int joints = 0;
  std::vector<double> vel;

  double at(int axis, int t, int j) const noexcept {
    return vel[(static_cast<std::size_t>(axis) * frames + t) * joints + j];
  }
  /// Copies the time series of one (joint, axis) pair.
  std::vector<double> signal(int axis, int j) const;
};

// Sequence CSV: header `frame,joint,x,y`; rows may come in any order but must
// cover every (frame, joint) pair exactly once.
SkeletonSequence load_sequence(const std::filesystem::path& path, SequenceMeta meta = {});
void save_sequence(const SkeletonSequence& seq, const std::filesystem::path& path);
std::string format_sequence(const SkeletonSequence& seq);
SkeletonSequence parse_sequence(std::string_view text, SequenceMeta meta = {}, std::string_view origin = "<memory>");

/// Per-frame centering on the joint mean, then division by the mean
/// per-frame joint spread (one scalar per clip).
SkeletonSequence preprocess(const SkeletonSequence& seq);

VelocityField compute_velocity(const SkeletonSequence& seq);

enum class ClipMode { Train, Eval };

/// Window start used by clip_to_length: centered in eval mode, uniform in
/// [0, T - target] in train mode, 0 when the clip is not longer than target.
int clip_offset(int frames, int target, ClipMode mode, Rng& rng);

/// Contiguous window starting at offset; clips shorter than target are padded
/// by repeating their last frame.
SkeletonSequence clip_window(const SkeletonSequence& seq, int target, int offset);
SkeletonSequence clip_to_length(const SkeletonSequence& seq, int target, ClipMode mode, Rng& rng);

enum class Split { Train, Gallery, Probe };
std::string_view to_string(Split s);

struct ManifestEntry {
  std::filesystem::path path;  // absolute or relative to the working directory
  int subject_id = 0;
  Condition condition = Condition::SYNTH;
  int angle_deg = 0;
  std::string sequence_id;  // file stem
  int ordinal = 0;          // 1-based rank within (subject, condition, angle), by sequence_id
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::Train;
};

// Manifest CSV: header `path,subject_id,condition,angle`; relative paths are
// resolved against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path, Split split = Split::Train);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// Recomputes ordinals and checks (subject_id, sequence_id) uniqueness.
void finalize_manifest(DatasetManifest& manifest);

SkeletonSequence load_entry(const ManifestEntry& entry);

}  // namespace gaitwave::skeleton
