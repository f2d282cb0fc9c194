#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gaitwave/cwt.hpp"
#include "gaitwave/eval.hpp"
#include "gaitwave/hash.hpp"
#include "gaitwave/model.hpp"
#include "gaitwave/nn/checkpoint.hpp"

namespace gaitwave::trainer {

enum class Precision { F32, F64 };

struct TrainConfig {
  int epochs = 100;
  int clip_len = 60;
  double lr_init = 6e-3;
  double weight_decay = 1e-5;
  double margin = 0.01;
  int P = 8;
  int K = 4;
  cwt::WaveletKind wavelet = cwt::WaveletKind::Morlet;
  int scales = 64;
  double period_min = 3.0;
  double period_max = 30.0;
  model::ModelConfig model;
  std::uint64_t seed = 1;
  Precision precision = Precision::F32;
  int val_every = 1;
  int eval_batch = 16;
  Sha256 config_hash{};

  void validate() const;
  /// Model config with input dimensions filled in from the data settings.
  model::ModelConfig resolved_model(int joints) const;
};

/// Cached per-sequence inputs: the preprocessed clip and its scalogram, keyed
/// by (manifest index, clip offset).
class FeatureBank {
 public:
  FeatureBank(const skeleton::DatasetManifest& manifest, const TrainConfig& cfg);

  struct Features {
    skeleton::SkeletonSequence clip;
    cwt::Scalogram scalogram;
  };

  const skeleton::SkeletonSequence& raw(int index);
  int joints();
  const Features& get(int index, int offset);
  int clip_offset(int index, skeleton::ClipMode mode, Rng& rng);

  template <typename Real>
  model::ModelInput<Real> batch(const std::vector<std::pair<int, int>>& picks, bool planes, bool sequences);

 private:
  const skeleton::DatasetManifest& manifest_;
  const TrainConfig& cfg_;
  std::map<int, skeleton::SkeletonSequence> raw_;
  std::map<std::pair<int, int>, Features> cache_;
  cwt::MotherWavelet wavelet_;
  cwt::ScaleGrid grid_;
  std::unique_ptr<cwt::CwtKernelTable> table_;
};

struct LogRow {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool validated = false;
  double val_rank1 = 0.0;
};

struct TrainResult {
  nn::Checkpoint best;
  int best_epoch = 0;
  double best_val_rank1 = -1.0;
  eval::EvalReport best_report;
  std::vector<LogRow> log;
};

/// Balanced-batch triplet training. After every val_every epochs (and the
/// last) the model is evaluated with the protocol; the checkpoint with the
/// strictly highest overall mean rank-1 is kept. Throws NonFiniteLoss.
TrainResult train(const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol, const TrainConfig& cfg);

/// CSV `epoch,loss,lr,val_rank1`; val_rank1 is empty for unvalidated epochs.
std::string format_log(const std::vector<LogRow>& log, const std::string& comment = "");

/// Eval-mode embeddings (centred clips, running BN statistics).
eval::EmbeddingTable embed_dataset(const nn::Checkpoint& ckpt, const TrainConfig& cfg,
                                   const skeleton::DatasetManifest& manifest, const std::vector<int>& indices);

eval::EvalReport evaluate(const nn::Checkpoint& ckpt, const TrainConfig& cfg, const skeleton::DatasetManifest& manifest,
                          const eval::EvalProtocol& protocol);

struct AblationRow {
  std::string wavelet;
  std::vector<double> set_means;
  double mean = 0.0;
};

struct AblationTable {
  std::vector<std::string> set_names;
  std::vector<AblationRow> rows;
};

/// One training run per wavelet with identical seeds; each row holds the
/// best checkpoint's per-set and overall mean rank-1.
AblationTable ablate_wavelets(const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol,
                              const TrainConfig& cfg, const std::vector<cwt::WaveletKind>& wavelets);

/// CSV `wavelet,<set names in lower case>...,mean`.
std::string format_ablation(const AblationTable& table, const std::string& comment = "");

}  // namespace gaitwave::trainer
