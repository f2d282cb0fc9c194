#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gaitwave/eval.hpp"
#include "gaitwave/hash.hpp"
#include "gaitwave/synth.hpp"
#include "gaitwave/trainer.hpp"

namespace gaitwave::config {

/// Every tunable of a run. Text form: one `key = value` per line, `#` starts
/// a comment, unknown keys are rejected. See configs/default.cfg.
struct RunConfig {
  skeleton::SynthConfig synth;
  trainer::TrainConfig train;
  std::string protocol = "synthetic";  // synthetic | casia-b
  int holdout = 2;
  std::string manifest;
  int threads = 1;

  /// Assigns one key from its text value; throws InvalidConfig.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// All keys, sorted, as `key=value` lines.
  std::string canonical() const;
  Sha256 hash() const;
  std::string hash_hex() const { return to_hex(hash()); }
  void validate() const;

  /// Training config with the config hash filled in.
  trainer::TrainConfig resolved_train() const;
  eval::EvalProtocol resolved_protocol() const;

  static const std::vector<std::string>& keys();
};

RunConfig parse_run_config(std::string_view text, std::string_view origin = "<memory>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Contents of configs/default.cfg, embedded at build time.
std::string_view default_config_text();
RunConfig default_run_config();

}  // namespace gaitwave::config
