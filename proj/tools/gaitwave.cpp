// gaitwave: synthetic data, scalograms, training, evaluation, ablation and
// self-checks from one binary.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data or I/O,
// 3 numerical failure (including a failed self-check).

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gaitwave/config.hpp"
#include "gaitwave/cwt.hpp"
#include "gaitwave/error.hpp"
#include "gaitwave/io.hpp"
#include "gaitwave/nn/checkpoint.hpp"
#include "gaitwave/parallel.hpp"
#include "gaitwave/runtime.hpp"
#include "gaitwave/selfcheck.hpp"
#include "gaitwave/synth.hpp"
#include "gaitwave/trainer.hpp"

namespace fs = std::filesystem;
using namespace gaitwave;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
      return kUsage;
    case ErrorKind::MalformedFile:
    case ErrorKind::NonFiniteCoordinate:
    case ErrorKind::FrameGap:
    case ErrorKind::DegenerateSequence:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::DegenerateBatch:
    case ErrorKind::InsufficientIdentities:
    case ErrorKind::EmptyCandidateSet:
    case ErrorKind::Io:
      return kData;
    case ErrorKind::InvalidRange:
    case ErrorKind::NotScalar:
    case ErrorKind::GraphCycle:
    case ErrorKind::OutOfRange:
    case ErrorKind::ZeroEmbedding:
    case ErrorKind::NonFiniteLoss:
      return kNumerical;
  }
  return kData;
}

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string wavelet;
  std::string backbone;
  std::string manifest;
  std::string checkpoint;
  std::string input;
  std::string wavelets = "morl,mexh,gaus1,shan";
};

config::RunConfig resolve_config(const Options& o) {
  config::RunConfig cfg;
  std::string path = o.config;
  if (path.empty())
    if (const char* env = std::getenv("GAITWAVE_CONFIG")) path = env;
  cfg = path.empty() ? config::default_run_config() : config::load_run_config(path);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.threads) cfg.set("threads", std::to_string(*o.threads));
  if (!o.wavelet.empty()) cfg.set("wavelet", o.wavelet);
  if (!o.backbone.empty()) cfg.set("backbone", o.backbone);
  if (!o.manifest.empty()) cfg.set("manifest", o.manifest);
  cfg.validate();
  set_num_threads(cfg.threads);
  return cfg;
}

std::string stamp(const config::RunConfig& cfg) { return "gaitwave config_sha256=" + cfg.hash_hex(); }

// The configured manifest, or the synthetic fixture regenerated into
// work_dir/data (generation is deterministic, so reruns rewrite identical files).
skeleton::DatasetManifest dataset(const config::RunConfig& cfg, const fs::path& work_dir) {
  if (!cfg.manifest.empty()) return skeleton::load_manifest(cfg.manifest);
  if (cfg.protocol != "synthetic")
    fail(ErrorKind::InvalidConfig, "protocol '" + cfg.protocol + "' needs a manifest (--manifest or the manifest key)");
  return skeleton::write_synthetic(skeleton::generate_synthetic(cfg.synth), work_dir / "data");
}

fs::path out_or(const Options& o, const fs::path& fallback) { return o.out.empty() ? fallback : fs::path(o.out); }

fs::path parent_dir(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

int cmd_synth(const Options& o) {
  const auto cfg = resolve_config(o);
  const fs::path dir = out_or(o, "data/synthetic");
  const auto manifest = skeleton::write_synthetic(skeleton::generate_synthetic(cfg.synth), dir);
  std::printf("wrote %zu sequences and %s\n", manifest.entries.size(), (dir / "manifest.csv").string().c_str());
  return kOk;
}

int cmd_scalogram(const Options& o) {
  if (o.input.empty()) fail(ErrorKind::InvalidConfig, "scalogram needs --input <sequence.csv>");
  if (o.out.empty()) fail(ErrorKind::InvalidConfig, "scalogram needs --out <file.wscl>");
  const auto cfg = resolve_config(o);
  const auto seq = skeleton::load_sequence(o.input);
  const auto w = cwt::MotherWavelet::make(cfg.train.wavelet);
  const auto grid = cwt::make_scale_grid(cfg.train.scales, cfg.train.period_min, cfg.train.period_max, w);
  const auto scal = cwt::build_scalogram(skeleton::compute_velocity(skeleton::preprocess(seq)), grid, w);
  cwt::write_wscl(scal, o.out);
  std::printf("V=%d A=%d F=%d L=%d -> %s\n", scal.joints, scal.axes, scal.scales, scal.length, o.out.c_str());
  return kOk;
}

int cmd_train(const Options& o) {
  const auto cfg = resolve_config(o);
  const fs::path dir = out_or(o, "runs/default");
  fs::create_directories(dir);
  const auto manifest = dataset(cfg, dir);
  const auto result = trainer::train(manifest, cfg.resolved_protocol(), cfg.resolved_train());
  nn::save_checkpoint(dir / "model.ckpt", result.best);
  io::write_file_atomic(dir / "train_log.csv", trainer::format_log(result.log, stamp(cfg)));
  io::write_file_atomic(dir / "val_report.csv", eval::format_report(result.best_report, stamp(cfg)));
  std::printf("best epoch %d, validation mean rank-1 %.2f%%; checkpoint %s\n", result.best_epoch,
              result.best_val_rank1, (dir / "model.ckpt").string().c_str());
  return kOk;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty()) fail(ErrorKind::InvalidConfig, "eval needs --checkpoint <model.ckpt>");
  const auto cfg = resolve_config(o);
  if (!fs::exists(o.checkpoint)) fail(ErrorKind::Io, "checkpoint not found: " + o.checkpoint);
  const auto ckpt = nn::load_checkpoint(o.checkpoint);
  const fs::path out = out_or(o, parent_dir(o.checkpoint) / "eval_report.csv");
  const auto manifest = dataset(cfg, parent_dir(out));
  const auto report = trainer::evaluate(ckpt, cfg.resolved_train(), manifest, cfg.resolved_protocol());
  io::write_file_atomic(out, eval::format_report(report, stamp(cfg) + " checkpoint_config_sha256=" + to_hex(ckpt.config_hash)));
  std::printf("overall mean rank-1 %.2f%% -> %s\n", report.overall_mean, out.string().c_str());
  return kOk;
}

int cmd_ablate(const Options& o) {
  const auto cfg = resolve_config(o);
  const fs::path out = out_or(o, "runs/ablation.csv");
  std::vector<cwt::WaveletKind> kinds;
  for (auto code : io::split(o.wavelets, ',')) kinds.push_back(cwt::parse_wavelet(code));
  const auto manifest = dataset(cfg, parent_dir(out));
  const auto table = trainer::ablate_wavelets(manifest, cfg.resolved_protocol(), cfg.resolved_train(), kinds);
  io::write_file_atomic(out, trainer::format_ablation(table, stamp(cfg)));
  for (const auto& row : table.rows) std::printf("%-6s mean rank-1 %.2f%%\n", row.wavelet.c_str(), row.mean);
  return kOk;
}

int cmd_selfcheck(const Options& o) {
  const auto cfg = resolve_config(o);
  bool ok = true;
  for (const auto& r : selfcheck::run_all(cfg.train.seed)) {
    std::printf("%s %-16s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  std::printf("%s\n", ok ? "all suites passed" : "self-check FAILED");
  return ok ? kOk : kNumerical;
}

int cmd_config(const Options& o) {
  const auto cfg = resolve_config(o);
  std::printf("# %s\n%s", stamp(cfg).c_str(), cfg.canonical().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  keep_heap_mapped();
  CLI::App app{"gaitwave: wavelet gait descriptors"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (default: $GAITWAVE_CONFIG, then the built-in desk config)");
    sub->add_option("--seed", o.seed, "Overrides the seed key");
    sub->add_option("--threads", o.threads, "Worker threads; 1 is bit-deterministic")->check(CLI::PositiveNumber);
    sub->add_option("--wavelet", o.wavelet, "morl | mexh | gaus1 | shan | cmor");
    sub->add_option("--backbone", o.backbone, "reference | none");
    sub->add_option("--manifest", o.manifest, "Dataset manifest CSV");
  };

  struct Command {
    CLI::App* app;
    int (*run)(const Options&);
  };
  std::vector<Command> commands;
  const auto add = [&](const char* name, const char* help, int (*run)(const Options&), const char* out_help) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    if (out_help) sub->add_option("--out", o.out, out_help);
    commands.push_back({sub, run});
    return sub;
  };

  add("synth", "Write the synthetic dataset (sequence CSVs + manifest.csv)", cmd_synth, "Output directory");
  add("scalogram", "Convert one sequence CSV into a WSCL scalogram", cmd_scalogram, "Output .wscl path")
      ->add_option("--input", o.input, "Sequence CSV")
      ->required();
  add("train", "Train and keep the best checkpoint", cmd_train, "Run directory");
  add("eval", "Evaluate a checkpoint with the configured protocol", cmd_eval, "Report CSV path")
      ->add_option("--checkpoint", o.checkpoint, "Checkpoint file")
      ->required();
  add("ablate", "Train one model per mother wavelet", cmd_ablate, "Ablation CSV path")
      ->add_option("--wavelets", o.wavelets, "Comma-separated wavelet codes");
  add("selfcheck", "Run the oracle and gradient suites", cmd_selfcheck, nullptr);
  add("config", "Print the resolved config and its hash", cmd_config, nullptr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (const auto& c : commands)
      if (c.app->parsed()) return c.run(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "gaitwave: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "gaitwave: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gaitwave: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
