#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "gaitwave/rng.hpp"
#include "gaitwave/skeleton.hpp"

namespace gaitwave::test {

// A fresh scratch directory, removed again when the object dies.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() / ("gaitwave_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline skeleton::SkeletonSequence random_sequence(int frames, int joints, Rng& rng, skeleton::SequenceMeta meta = {}) {
  std::vector<double> c(static_cast<std::size_t>(2) * frames * joints);
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);
  return skeleton::SkeletonSequence(frames, joints, std::move(c), std::move(meta));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace gaitwave::test
