#include "gaitwave/stream.hpp"

namespace gaitwave::stream {

using nn::Tensor;

void StreamConfig::validate() const {
  if (c_stem1 <= 0 || c_stem2 <= 0 || c_branch <= 0)
    fail(ErrorKind::InvalidConfig, "stream channel counts must be positive");
  if (descriptor_dim != kDescriptorDim)
    fail(ErrorKind::InvalidConfig, "wavelet descriptor width is fixed at 128, got " + std::to_string(descriptor_dim));
  if (joints <= 0 || scales <= 0 || length <= 0) fail(ErrorKind::InvalidConfig, "stream input dimensions must be positive");
}

template <typename Real>
PlaneCnn<Real>::PlaneCnn(const StreamConfig& cfg, nn::ParamStore<Real>& store, const std::string& prefix, Rng& rng)
    : stem1(store, prefix + "stem1", 1, cfg.c_stem1, 5, 5, rng),
      stem2(store, prefix + "stem2", cfg.c_stem1, cfg.c_stem2, 3, 3, rng),
      branch3(store, prefix + "branch3", cfg.c_stem2, cfg.c_branch, 3, 3, rng),
      branch7(store, prefix + "branch7", cfg.c_stem2, cfg.c_branch, 7, 7, rng),
      merge_bn(store, prefix + "merge_bn", cfg.c_out()) {}

template <typename Real>
Tensor<Real> PlaneCnn<Real>::stem(const Tensor<Real>& x, bool training) {
  return stem2(stem1(x, training), training);
}

template <typename Real>
Tensor<Real> PlaneCnn<Real>::block(const Tensor<Real>& x, bool training) {
  auto fine = branch3(x, training);
  auto coarse = branch7(x, training);
  return merge_bn(nn::concat<Real>({fine, coarse}, 1), training);
}

template <typename Real>
Tensor<Real> PlaneCnn<Real>::features(const Tensor<Real>& x, bool training) {
  return nn::global_avg_pool(block(stem(x, training), training));
}

template <typename Real>
WaveletStream<Real>::WaveletStream(StreamConfig cfg, nn::ParamStore<Real>& store, Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.share_weights_across_joints) {
    cnns_.emplace_back(cfg_, store, prefix, rng);
  } else {
    for (int j = 0; j < cfg_.joints; ++j) cnns_.emplace_back(cfg_, store, prefix + "joint" + std::to_string(j) + ".", rng);
  }
  fc_ = nn::Linear<Real>(store, prefix + "fc", cfg_.fc_in(), cfg_.descriptor_dim, rng);
}

template <typename Real>
Tensor<Real> WaveletStream<Real>::forward(const Tensor<Real>& planes, bool training) {
  const int per_seq = cfg_.joints * 2;
  if (planes.rank() != 4 || planes.dim(1) != 1 || planes.dim(2) != cfg_.scales || planes.dim(3) != cfg_.length ||
      planes.dim(0) % per_seq != 0)
    fail(ErrorKind::ShapeMismatch, "wavelet stream expects [B*" + std::to_string(per_seq) + ",1," +
                                       std::to_string(cfg_.scales) + "," + std::to_string(cfg_.length) + "], got " +
                                       nn::shape_str(planes.shape()));
  const int batch = planes.dim(0) / per_seq;
  const int c_out = cfg_.c_out();
  Tensor<Real> joined;
  if (cfg_.share_weights_across_joints) {
    auto f = cnns_[0].features(planes, training);  // [B*V*2, C_out]
    joined = nn::reshape(f, {batch, per_seq * c_out});
  } else {
    std::vector<Tensor<Real>> per_joint;
    for (int j = 0; j < cfg_.joints; ++j) {
      std::vector<int> rows;
      for (int b = 0; b < batch; ++b)
        for (int a = 0; a < 2; ++a) rows.push_back((b * cfg_.joints + j) * 2 + a);
      auto f = cnns_[j].features(nn::take_rows(planes, rows), training);  // [B*2, C_out]
      per_joint.push_back(nn::reshape(f, {batch, 2 * c_out}));
    }
    joined = nn::concat(per_joint, 1);
  }
  return fc_(joined);
}

template <typename Real>
Tensor<Real> stack_planes(const std::vector<const cwt::Scalogram*>& batch) {
  if (batch.empty()) fail(ErrorKind::ShapeMismatch, "empty scalogram batch");
  const auto& first = *batch.front();
  const std::size_t per = first.h.size();
  std::vector<Real> data;
  data.reserve(per * batch.size());
  for (const auto* s : batch) {
    if (s->joints != first.joints || s->axes != first.axes || s->scales != first.scales || s->length != first.length)
      fail(ErrorKind::ShapeMismatch, "scalograms in a batch must share one shape");
    for (double v : s->h) data.push_back(static_cast<Real>(v));
  }
  const int planes = static_cast<int>(batch.size()) * first.joints * first.axes;
  return Tensor<Real>::from({planes, 1, first.scales, first.length}, std::move(data));
}

template class PlaneCnn<float>;
template class PlaneCnn<double>;
template class WaveletStream<float>;
template class WaveletStream<double>;
template Tensor<float> stack_planes(const std::vector<const cwt::Scalogram*>&);
template Tensor<double> stack_planes(const std::vector<const cwt::Scalogram*>&);

}  // namespace gaitwave::stream
