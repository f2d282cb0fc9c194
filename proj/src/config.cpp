#include "gaitwave/config.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "gaitwave/io.hpp"

namespace gaitwave::config {

namespace {

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Messages omit the key; RunConfig::set prefixes it.
[[noreturn]] void bad_value(std::string_view value, std::string_view expected) {
  fail(ErrorKind::InvalidConfig, "'" + std::string(value) + "' is not " + std::string(expected));
}

long long as_int(std::string_view v) {
  long long out = 0;
  if (!io::parse_int(v, out)) bad_value(v, "an integer");
  return out;
}

double as_double(std::string_view v) {
  double out = 0;
  if (!io::parse_double(v, out)) bad_value(v, "a number");
  return out;
}

bool as_bool(std::string_view v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  bad_value(v, "a boolean (true/false)");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

template <typename T>
Field int_field(T RunConfig::*group, int T::*member) {
  return {[=](RunConfig& c, std::string_view v) { (c.*group).*member = static_cast<int>(as_int(v)); },
          [=](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

template <typename T>
Field double_field(T RunConfig::*group, double T::*member) {
  return {[=](RunConfig& c, std::string_view v) { (c.*group).*member = as_double(v); },
          [=](const RunConfig& c) { return io::format_double((c.*group).*member); }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  using skeleton::SynthConfig;
  using trainer::TrainConfig;
  static const std::map<std::string, Field, std::less<>> table = {
      {"seed",
       {[](RunConfig& c, std::string_view v) {
          const auto s = as_int(v);
          if (s < 0) bad_value(v, "a non-negative integer");
          c.synth.seed = c.train.seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"threads", {[](RunConfig& c, std::string_view v) { c.threads = static_cast<int>(as_int(v)); },
                   [](const RunConfig& c) { return std::to_string(c.threads); }}},
      {"manifest", {[](RunConfig& c, std::string_view v) { c.manifest = std::string(v); },
                    [](const RunConfig& c) { return c.manifest; }}},
      {"protocol", {[](RunConfig& c, std::string_view v) {
                      if (v != "synthetic" && v != "casia-b") bad_value(v, "synthetic or casia-b");
                      c.protocol = std::string(v);
                    },
                    [](const RunConfig& c) { return c.protocol; }}},
      {"holdout", {[](RunConfig& c, std::string_view v) { c.holdout = static_cast<int>(as_int(v)); },
                   [](const RunConfig& c) { return std::to_string(c.holdout); }}},
      // synthetic data
      {"synth.subjects", int_field(&RunConfig::synth, &SynthConfig::n_subjects)},
      {"synth.sequences_per_subject", int_field(&RunConfig::synth, &SynthConfig::sequences_per_subject)},
      {"synth.frames", int_field(&RunConfig::synth, &SynthConfig::frames)},
      {"synth.joints", int_field(&RunConfig::synth, &SynthConfig::joints)},
      {"synth.cadence_min", double_field(&RunConfig::synth, &SynthConfig::cadence_min)},
      {"synth.cadence_max", double_field(&RunConfig::synth, &SynthConfig::cadence_max)},
      {"synth.amp_jitter", double_field(&RunConfig::synth, &SynthConfig::amp_jitter)},
      {"synth.phase_jitter", double_field(&RunConfig::synth, &SynthConfig::phase_jitter)},
      {"synth.noise_sigma", double_field(&RunConfig::synth, &SynthConfig::noise_sigma)},
      // scalogram
      {"wavelet", {[](RunConfig& c, std::string_view v) { c.train.wavelet = cwt::parse_wavelet(v); },
                   [](const RunConfig& c) { return std::string(cwt::code(c.train.wavelet)); }}},
      {"scales", int_field(&RunConfig::train, &TrainConfig::scales)},
      {"period_min", double_field(&RunConfig::train, &TrainConfig::period_min)},
      {"period_max", double_field(&RunConfig::train, &TrainConfig::period_max)},
      // model
      {"stream", {[](RunConfig& c, std::string_view v) { c.train.model.use_stream = as_bool(v); },
                  [](const RunConfig& c) { return bool_str(c.train.model.use_stream); }}},
      {"backbone", {[](RunConfig& c, std::string_view v) {
                      if (v != "reference" && v != "none") bad_value(v, "reference or none");
                      c.train.model.backbone = std::string(v);
                    },
                    [](const RunConfig& c) { return c.train.model.backbone; }}},
      {"stream.c_stem1", {[](RunConfig& c, std::string_view v) { c.train.model.stream.c_stem1 = static_cast<int>(as_int(v)); },
                          [](const RunConfig& c) { return std::to_string(c.train.model.stream.c_stem1); }}},
      {"stream.c_stem2", {[](RunConfig& c, std::string_view v) { c.train.model.stream.c_stem2 = static_cast<int>(as_int(v)); },
                          [](const RunConfig& c) { return std::to_string(c.train.model.stream.c_stem2); }}},
      {"stream.c_branch", {[](RunConfig& c, std::string_view v) { c.train.model.stream.c_branch = static_cast<int>(as_int(v)); },
                           [](const RunConfig& c) { return std::to_string(c.train.model.stream.c_branch); }}},
      {"stream.share_weights",
       {[](RunConfig& c, std::string_view v) { c.train.model.stream.share_weights_across_joints = as_bool(v); },
        [](const RunConfig& c) { return bool_str(c.train.model.stream.share_weights_across_joints); }}},
      {"backbone.channels",
       {[](RunConfig& c, std::string_view v) {
          std::vector<int> ch;
          for (auto part : io::split(v, ','))
            ch.push_back(static_cast<int>(as_int(part)));
          c.train.model.reference.channels = ch;
        },
        [](const RunConfig& c) {
          std::string out;
          for (int ch : c.train.model.reference.channels) out += (out.empty() ? "" : ",") + std::to_string(ch);
          return out;
        }}},
      {"backbone.kernel", {[](RunConfig& c, std::string_view v) { c.train.model.reference.kernel = static_cast<int>(as_int(v)); },
                           [](const RunConfig& c) { return std::to_string(c.train.model.reference.kernel); }}},
      // training
      {"epochs", int_field(&RunConfig::train, &TrainConfig::epochs)},
      {"clip_len", int_field(&RunConfig::train, &TrainConfig::clip_len)},
      {"lr", double_field(&RunConfig::train, &TrainConfig::lr_init)},
      {"weight_decay", double_field(&RunConfig::train, &TrainConfig::weight_decay)},
      {"margin", double_field(&RunConfig::train, &TrainConfig::margin)},
      {"P", int_field(&RunConfig::train, &TrainConfig::P)},
      {"K", int_field(&RunConfig::train, &TrainConfig::K)},
      {"val_every", int_field(&RunConfig::train, &TrainConfig::val_every)},
      {"eval_batch", int_field(&RunConfig::train, &TrainConfig::eval_batch)},
      {"precision", {[](RunConfig& c, std::string_view v) {
                       if (v == "f32") c.train.precision = trainer::Precision::F32;
                       else if (v == "f64") c.train.precision = trainer::Precision::F64;
                       else bad_value(v, "f32 or f64");
                     },
                     [](const RunConfig& c) { return std::string(c.train.precision == trainer::Precision::F64 ? "f64" : "f32"); }}},
  };
  return table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) fail(ErrorKind::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(*this, value);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidConfig) throw;
    fail(ErrorKind::InvalidConfig, "config key '" + std::string(key) + "': " + e.message());
  }
}

std::string RunConfig::get(std::string_view key) const {
  auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorKind::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return all;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + "=" + f.get(*this) + "\n";
  return out;
}

Sha256 RunConfig::hash() const { return sha256(canonical()); }

void RunConfig::validate() const {
  skeleton::validate(synth);
  train.validate();
  train.model.validate();
  if (threads < 1) fail(ErrorKind::InvalidConfig, "threads must be positive");
  if (protocol == "synthetic" && (holdout < 1 || holdout >= synth.sequences_per_subject))
    fail(ErrorKind::InvalidConfig, "holdout must be in [1, synth.sequences_per_subject)");
}

trainer::TrainConfig RunConfig::resolved_train() const {
  auto t = train;
  t.config_hash = hash();
  return t;
}

eval::EvalProtocol RunConfig::resolved_protocol() const {
  if (protocol == "casia-b") return eval::casia_b_protocol();
  return eval::synthetic_protocol(synth.sequences_per_subject, holdout);
}

RunConfig parse_run_config(std::string_view text, std::string_view origin) {
  RunConfig cfg;
  int line_no = 0;
  for (auto line : io::lines(text)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::InvalidConfig, std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorKind::InvalidConfig, std::string(origin) + ":" + std::to_string(line_no) + ": " + e.message());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_file(path), path.string());
}

RunConfig default_run_config() { return parse_run_config(default_config_text(), "configs/default.cfg"); }

}  // namespace gaitwave::config
