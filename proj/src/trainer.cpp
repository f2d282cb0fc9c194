#include "gaitwave/trainer.hpp"

#include <cctype>
#include <cmath>

#include "gaitwave/io.hpp"

namespace gaitwave::trainer {

namespace {

constexpr std::uint64_t kSamplerStream = 0x5a3b;
constexpr std::uint64_t kClipStream = 0xc119;

template <typename Real>
eval::EmbeddingTable embed_with(model::GaitModel<Real>& model, FeatureBank& bank, const TrainConfig& cfg,
                                const skeleton::DatasetManifest& manifest, const std::vector<int>& indices) {
  nn::NoGradGuard no_grad;
  Rng unused(0);
  eval::EmbeddingTable table;
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(cfg.eval_batch)) {
    const std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(cfg.eval_batch));
    std::vector<std::pair<int, int>> picks;
    for (std::size_t i = start; i < end; ++i)
      picks.emplace_back(indices[i], bank.clip_offset(indices[i], skeleton::ClipMode::Eval, unused));
    auto emb = model.embed(bank.batch<Real>(picks, model.uses_stream(), model.uses_backbone()), false);
    const int dim = emb.dim(1);
    for (std::size_t i = start; i < end; ++i) {
      const auto& e = manifest.entries[indices[i]];
      eval::EmbeddingRow row{e.sequence_id, e.subject_id, e.condition, e.angle_deg, {}};
      const auto* p = emb.data().data() + (i - start) * dim;
      row.embedding.assign(p, p + dim);
      table.push_back(std::move(row));
    }
  }
  return table;
}

template <typename Real>
eval::EvalReport evaluate_with(model::GaitModel<Real>& model, FeatureBank& bank, const TrainConfig& cfg,
                               const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol,
                               const eval::ProtocolSplit& split) {
  const auto gallery = embed_with(model, bank, cfg, manifest, split.gallery);
  std::vector<eval::ProbeSet> probes;
  for (const auto& [name, rows] : split.probes) probes.push_back({name, embed_with(model, bank, cfg, manifest, rows)});
  return eval::rank1_eval(gallery, probes, protocol.exclude_identical_view);
}

template <typename Real>
TrainResult train_impl(const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol,
                       const TrainConfig& cfg) {
  cfg.validate();
  const auto split = eval::apply_protocol(manifest, protocol);
  FeatureBank bank(manifest, cfg);
  model::GaitModel<Real> model(cfg.resolved_model(bank.joints()), cfg.seed);
  nn::Adam<Real> adam(model.params(), nn::AdamConfig{0.9, 0.999, 1e-8, cfg.weight_decay});

  std::vector<int> labels;
  for (int i : split.train) labels.push_back(manifest.entries[i].subject_id);
  fusion::BalancedSampler sampler(labels, cfg.P, cfg.K, derive_seed(cfg.seed, kSamplerStream));
  Rng clip_rng(derive_seed(cfg.seed, kClipStream));

  const int batch = cfg.P * cfg.K;
  const int steps_per_epoch = static_cast<int>((split.train.size() + batch - 1) / batch);
  const std::int64_t total_steps = static_cast<std::int64_t>(steps_per_epoch) * cfg.epochs;
  std::int64_t step = 0;

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    long double loss_sum = 0.0L;
    double lr = 0.0;
    const auto batches = sampler.next_epoch(steps_per_epoch);
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      const auto& local = batches[s];
      std::vector<std::pair<int, int>> picks;
      std::vector<int> batch_labels;
      for (int li : local) {
        const int idx = split.train[li];
        picks.emplace_back(idx, bank.clip_offset(idx, skeleton::ClipMode::Train, clip_rng));
        batch_labels.push_back(labels[li]);
      }
      model.params().zero_grad();
      auto emb = model.embed(bank.batch<Real>(picks, model.uses_stream(), model.uses_backbone()), true);
      auto loss = fusion::triplet_loss(emb, batch_labels, cfg.margin);
      const double value = loss.item();
      if (!std::isfinite(value))
        fail(ErrorKind::NonFiniteLoss, "loss became " + io::format_double(value) + " at epoch " + std::to_string(epoch) +
                                           ", step " + std::to_string(step) + " (lr " + io::format_double(lr) + ")");
      nn::backward(loss);
      lr = nn::one_cycle_lr(step, total_steps, cfg.lr_init);
      adam.step(lr);
      loss_sum += value;
    }
    LogRow row{epoch, static_cast<double>(loss_sum / steps_per_epoch), lr, false, 0.0};
    if (epoch % cfg.val_every == 0 || epoch == cfg.epochs) {
      auto report = evaluate_with(model, bank, cfg, manifest, protocol, split);
      row.validated = true;
      row.val_rank1 = report.overall_mean;
      if (row.val_rank1 > result.best_val_rank1) {
        result.best_val_rank1 = row.val_rank1;
        result.best_epoch = epoch;
        result.best_report = std::move(report);
        result.best = nn::capture(model.params(), &adam, cfg.config_hash, cfg.seed);
      }
    }
    result.log.push_back(row);
  }
  return result;
}

template <typename Real>
eval::EmbeddingTable embed_impl(const nn::Checkpoint& ckpt, const TrainConfig& cfg,
                                const skeleton::DatasetManifest& manifest, const std::vector<int>& indices) {
  FeatureBank bank(manifest, cfg);
  model::GaitModel<Real> model(cfg.resolved_model(bank.joints()), cfg.seed);
  nn::restore<Real>(ckpt, model.params(), nullptr);
  return embed_with(model, bank, cfg, manifest, indices);
}

template <typename Real>
eval::EvalReport evaluate_impl(const nn::Checkpoint& ckpt, const TrainConfig& cfg,
                               const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol) {
  const auto split = eval::apply_protocol(manifest, protocol);
  FeatureBank bank(manifest, cfg);
  model::GaitModel<Real> model(cfg.resolved_model(bank.joints()), cfg.seed);
  nn::restore<Real>(ckpt, model.params(), nullptr);
  return evaluate_with(model, bank, cfg, manifest, protocol, split);
}

}  // namespace

void TrainConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::InvalidConfig, what);
  };
  require(epochs >= 1, "epochs must be positive");
  require(clip_len >= 2, "clip_len must be at least 2");
  require(lr_init > 0.0 && std::isfinite(lr_init), "lr must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(margin > 0.0, "margin must be positive");
  require(P >= 2 && K >= 2, "P and K must be at least 2");
  require(scales >= 2, "scales must be at least 2");
  require(period_min >= 2.0 && period_min < period_max, "need 2 <= period_min < period_max");
  require(val_every >= 1, "val_every must be positive");
  require(eval_batch >= 1, "eval_batch must be positive");
}

model::ModelConfig TrainConfig::resolved_model(int joints) const {
  auto m = model;
  m.stream.joints = joints;
  m.stream.scales = scales;
  m.stream.length = clip_len - 1;
  m.reference.joints = joints;
  return m;
}

FeatureBank::FeatureBank(const skeleton::DatasetManifest& manifest, const TrainConfig& cfg)
    : manifest_(manifest),
      cfg_(cfg),
      wavelet_(cwt::MotherWavelet::make(cfg.wavelet)),
      grid_(cwt::make_scale_grid(cfg.scales, cfg.period_min, cfg.period_max, wavelet_)) {}

const skeleton::SkeletonSequence& FeatureBank::raw(int index) {
  auto it = raw_.find(index);
  if (it == raw_.end()) it = raw_.emplace(index, skeleton::load_entry(manifest_.entries.at(index))).first;
  return it->second;
}

int FeatureBank::joints() {
  if (manifest_.entries.empty()) fail(ErrorKind::InvalidConfig, "manifest is empty");
  return raw(0).joints();
}

int FeatureBank::clip_offset(int index, skeleton::ClipMode mode, Rng& rng) {
  return skeleton::clip_offset(raw(index).frames(), cfg_.clip_len, mode, rng);
}

const FeatureBank::Features& FeatureBank::get(int index, int offset) {
  const auto key = std::make_pair(index, offset);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const auto& seq = raw(index);
  auto clip = skeleton::preprocess(skeleton::clip_window(seq, cfg_.clip_len, offset));
  if (!table_) table_ = std::make_unique<cwt::CwtKernelTable>(grid_, wavelet_, cfg_.clip_len - 1);
  auto scal = cwt::build_scalogram(skeleton::compute_velocity(clip), *table_);
  return cache_.emplace(key, Features{std::move(clip), std::move(scal)}).first->second;
}

template <typename Real>
model::ModelInput<Real> FeatureBank::batch(const std::vector<std::pair<int, int>>& picks, bool planes, bool sequences) {
  std::vector<const cwt::Scalogram*> scals;
  std::vector<const skeleton::SkeletonSequence*> clips;
  for (const auto& [index, offset] : picks) {
    const auto& f = get(index, offset);
    scals.push_back(&f.scalogram);
    clips.push_back(&f.clip);
  }
  model::ModelInput<Real> in;
  if (planes) in.planes = stream::stack_planes<Real>(scals);
  if (sequences) in.sequences = backbone::stack_sequences<Real>(clips);
  return in;
}

template model::ModelInput<float> FeatureBank::batch(const std::vector<std::pair<int, int>>&, bool, bool);
template model::ModelInput<double> FeatureBank::batch(const std::vector<std::pair<int, int>>&, bool, bool);

TrainResult train(const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol, const TrainConfig& cfg) {
  return cfg.precision == Precision::F64 ? train_impl<double>(manifest, protocol, cfg)
                                         : train_impl<float>(manifest, protocol, cfg);
}

std::string format_log(const std::vector<LogRow>& log, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "epoch,loss,lr,val_rank1\n";
  for (const auto& r : log)
    out += std::to_string(r.epoch) + "," + io::format_double(r.loss) + "," + io::format_double(r.lr) + "," +
           (r.validated ? io::format_double(r.val_rank1) : std::string()) + "\n";
  return out;
}

eval::EmbeddingTable embed_dataset(const nn::Checkpoint& ckpt, const TrainConfig& cfg,
                                   const skeleton::DatasetManifest& manifest, const std::vector<int>& indices) {
  return cfg.precision == Precision::F64 ? embed_impl<double>(ckpt, cfg, manifest, indices)
                                         : embed_impl<float>(ckpt, cfg, manifest, indices);
}

eval::EvalReport evaluate(const nn::Checkpoint& ckpt, const TrainConfig& cfg, const skeleton::DatasetManifest& manifest,
                          const eval::EvalProtocol& protocol) {
  return cfg.precision == Precision::F64 ? evaluate_impl<double>(ckpt, cfg, manifest, protocol)
                                         : evaluate_impl<float>(ckpt, cfg, manifest, protocol);
}

AblationTable ablate_wavelets(const skeleton::DatasetManifest& manifest, const eval::EvalProtocol& protocol,
                              const TrainConfig& cfg, const std::vector<cwt::WaveletKind>& wavelets) {
  if (wavelets.size() < 2) fail(ErrorKind::InvalidConfig, "ablation needs at least two wavelets");
  AblationTable table;
  for (const auto& [name, sel] : protocol.probe_sets) table.set_names.push_back(name);
  for (auto kind : wavelets) {
    auto run = cfg;
    run.wavelet = kind;
    const auto result = train(manifest, protocol, run);
    AblationRow row{std::string(cwt::code(kind)), {}, result.best_report.overall_mean};
    for (const auto& name : table.set_names) row.set_means.push_back(result.best_report.set_mean(name));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string format_ablation(const AblationTable& table, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "wavelet";
  for (auto name : table.set_names) {
    for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out += "," + name;
  }
  out += ",mean\n";
  for (const auto& r : table.rows) {
    out += r.wavelet;
    for (double v : r.set_means) out += "," + io::format_double(v);
    out += "," + io::format_double(r.mean) + "\n";
  }
  return out;
}

}  // namespace gaitwave::trainer
