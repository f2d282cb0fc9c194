#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gaitwave/nn/layers.hpp"
#include "gaitwave/skeleton.hpp"

namespace gaitwave::backbone {

/// Any model mapping a batch of preprocessed sequences, laid out as
/// [B, 2V, 1, T] (channel = axis * V + joint), to [B, feature_dim()].
template <typename Real>
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual int feature_dim() const = 0;
  virtual nn::Tensor<Real> forward(const nn::Tensor<Real>& sequences, bool training) = 0;
};

struct ReferenceConfig {
  int joints = 17;
  std::vector<int> channels{64, 128, 128};
  int kernel = 7;
  int feature_dim = 128;
};

/// Temporal convolution stack: conv1d(k) -> BN -> ReLU per stage, GAP over
/// time, FC.
template <typename Real>
class ReferenceBackbone final : public Backbone<Real> {
 public:
  ReferenceBackbone(ReferenceConfig cfg, nn::ParamStore<Real>& store, Rng& rng, const std::string& prefix = "backbone.");
  int feature_dim() const override { return cfg_.feature_dim; }
  nn::Tensor<Real> forward(const nn::Tensor<Real>& sequences, bool training) override;

 private:
  ReferenceConfig cfg_;
  std::vector<nn::ConvBnRelu<Real>> stages_;
  nn::Linear<Real> fc_;
};

/// "reference" builds ReferenceBackbone; "none" returns null. Anything else
/// throws InvalidConfig.
template <typename Real>
std::unique_ptr<Backbone<Real>> make_backbone(const std::string& name, const ReferenceConfig& cfg,
                                              nn::ParamStore<Real>& store, Rng& rng);

/// Packs equal-length sequences into [B, 2V, 1, T].
template <typename Real>
nn::Tensor<Real> stack_sequences(const std::vector<const skeleton::SkeletonSequence*>& batch);

}  // namespace gaitwave::backbone
