#include "gaitwave/backbone.hpp"

namespace gaitwave::backbone {

template <typename Real>
ReferenceBackbone<Real>::ReferenceBackbone(ReferenceConfig cfg, nn::ParamStore<Real>& store, Rng& rng,
                                           const std::string& prefix)
    : cfg_(std::move(cfg)) {
  if (cfg_.channels.empty() || cfg_.kernel < 1 || cfg_.kernel % 2 == 0 || cfg_.feature_dim <= 0)
    fail(ErrorKind::InvalidConfig, "reference backbone needs channels, an odd kernel and a positive feature width");
  int in = 2 * cfg_.joints;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    stages_.emplace_back(store, prefix + "conv" + std::to_string(i + 1), in, cfg_.channels[i], 1, cfg_.kernel, rng);
    in = cfg_.channels[i];
  }
  fc_ = nn::Linear<Real>(store, prefix + "fc", in, cfg_.feature_dim, rng);
}

template <typename Real>
nn::Tensor<Real> ReferenceBackbone<Real>::forward(const nn::Tensor<Real>& sequences, bool training) {
  if (sequences.rank() != 4 || sequences.dim(1) != 2 * cfg_.joints || sequences.dim(2) != 1)
    fail(ErrorKind::ShapeMismatch, "reference backbone expects [B," + std::to_string(2 * cfg_.joints) + ",1,T], got " +
                                       nn::shape_str(sequences.shape()));
  auto x = sequences;
  for (auto& stage : stages_) x = stage(x, training);
  return fc_(nn::global_avg_pool(x));
}

template <typename Real>
std::unique_ptr<Backbone<Real>> make_backbone(const std::string& name, const ReferenceConfig& cfg,
                                              nn::ParamStore<Real>& store, Rng& rng) {
  if (name == "reference") return std::make_unique<ReferenceBackbone<Real>>(cfg, store, rng);
  if (name == "none") return nullptr;
  fail(ErrorKind::InvalidConfig, "unknown backbone '" + name + "' (expected reference or none)");
}

template <typename Real>
nn::Tensor<Real> stack_sequences(const std::vector<const skeleton::SkeletonSequence*>& batch) {
  if (batch.empty()) fail(ErrorKind::ShapeMismatch, "empty sequence batch");
  const int T = batch.front()->frames(), V = batch.front()->joints();
  std::vector<Real> data;
  data.reserve(batch.size() * 2 * V * T);
  for (const auto* s : batch) {
    if (s->frames() != T || s->joints() != V) fail(ErrorKind::ShapeMismatch, "sequences in a batch must share one shape");
    for (int a = 0; a < skeleton::kAxes; ++a)
      for (int j = 0; j < V; ++j)
        for (int t = 0; t < T; ++t) data.push_back(static_cast<Real>(s->at(a, t, j)));
  }
  return nn::Tensor<Real>::from({static_cast<int>(batch.size()), 2 * V, 1, T}, std::move(data));
}

template class ReferenceBackbone<float>;
template class ReferenceBackbone<double>;
template std::unique_ptr<Backbone<float>> make_backbone(const std::string&, const ReferenceConfig&,
                                                        nn::ParamStore<float>&, Rng&);
template std::unique_ptr<Backbone<double>> make_backbone(const std::string&, const ReferenceConfig&,
                                                         nn::ParamStore<double>&, Rng&);
template nn::Tensor<float> stack_sequences(const std::vector<const skeleton::SkeletonSequence*>&);
template nn::Tensor<double> stack_sequences(const std::vector<const skeleton::SkeletonSequence*>&);

}  // namespace gaitwave::backbone
