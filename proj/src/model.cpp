#include "gaitwave/model.hpp"

namespace gaitwave::model {

namespace {
constexpr std::uint64_t kInitStream = 0x1417;
}

void ModelConfig::validate() const {
  if (backbone != "reference" && backbone != "none")
    fail(ErrorKind::InvalidConfig, "unknown backbone '" + backbone + "' (expected reference or none)");
  if (!use_stream && backbone == "none") fail(ErrorKind::InvalidConfig, "model needs the wavelet stream or a backbone");
  if (use_stream) stream.validate();
  if (reference.joints != stream.joints) fail(ErrorKind::InvalidConfig, "backbone and stream disagree on joint count");
}

template <typename Real>
GaitModel<Real>::GaitModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(seed, kInitStream));
  int in_dim = 0;
  if (cfg_.use_stream) {
    stream_ = std::make_unique<stream::WaveletStream<Real>>(cfg_.stream, store_, rng);
    in_dim += cfg_.stream.descriptor_dim;
  }
  backbone_ = backbone::make_backbone<Real>(cfg_.backbone, cfg_.reference, store_, rng);
  if (backbone_) in_dim += backbone_->feature_dim();
  head_ = std::make_unique<fusion::FusionHead<Real>>(in_dim, store_, rng);
}

template <typename Real>
nn::Tensor<Real> GaitModel<Real>::embed(const ModelInput<Real>& input, bool training) {
  nn::Tensor<Real> fb, fw;
  if (backbone_) fb = backbone_->forward(input.sequences, training);
  if (stream_) fw = stream_->forward(input.planes, training);
  if (fb.defined() && fw.defined() && fb.dim(0) != fw.dim(0))
    fail(ErrorKind::ShapeMismatch, "backbone and stream batch sizes differ");
  return head_->forward(fb, fw);
}

template <typename Real>
void GaitModel<Real>::collapse() {
  auto& fc = head_->fc();
  std::fill(fc.weight.data().begin(), fc.weight.data().end(), Real(0));
  std::fill(fc.bias.data().begin(), fc.bias.data().end(), Real(0));
}

template class GaitModel<float>;
template class GaitModel<double>;

}  // namespace gaitwave::model
