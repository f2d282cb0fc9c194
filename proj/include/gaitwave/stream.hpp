#pragma once

#include <string>
#include <vector>

#include "gaitwave/cwt.hpp"
#include "gaitwave/nn/layers.hpp"

namespace gaitwave::stream {

inline constexpr int kDescriptorDim = 128;

struct StreamConfig {
  int c_stem1 = 16;
  int c_stem2 = 32;
  int c_branch = 32;  // per branch; C_out = 2 * c_branch
  int descriptor_dim = kDescriptorDim;
  int joints = 17;
  int scales = 64;
  int length = 59;
  bool share_weights_across_joints = true;

  int c_out() const noexcept { return 2 * c_branch; }
  int fc_in() const noexcept { return joints * 2 * c_out(); }
  void validate() const;
};

/// The per-plane CNN: stem (5x5, 3x3) then the 3x3 / 7x7 two-branch block.
template <typename Real>
class PlaneCnn {
 public:
  PlaneCnn(const StreamConfig& cfg, nn::ParamStore<Real>& store, const std::string& prefix, Rng& rng);

  /// [N,1,F,L] -> [N,c_stem2,F,L]
  nn::Tensor<Real> stem(const nn::Tensor<Real>& x, bool training);
  /// [N,c_stem2,F,L] -> [N,2*c_branch,F,L]
  nn::Tensor<Real> block(const nn::Tensor<Real>& x, bool training);
  /// [N,1,F,L] -> [N,C_out] (stem, block, global average pooling)
  nn::Tensor<Real> features(const nn::Tensor<Real>& x, bool training);

  nn::ConvBnRelu<Real> stem1, stem2, branch3, branch7;
  nn::BatchNorm<Real> merge_bn;
};

/// Wavelet feature stream: one CNN per (joint, axis) plane, GAP, per-joint
/// [x; y] concatenation, all joints concatenated, FC to the 128-d descriptor.
template <typename Real>
class WaveletStream {
 public:
  WaveletStream(StreamConfig cfg, nn::ParamStore<Real>& store, Rng& rng, const std::string& prefix = "wavelet_stream.");

  /// planes: [B*V*2, 1, F, L] in (sequence, joint, axis) order -> [B, 128].
  nn::Tensor<Real> forward(const nn::Tensor<Real>& planes, bool training);

  const StreamConfig& config() const noexcept { return cfg_; }
  PlaneCnn<Real>& cnn(int joint) { return cnns_[cfg_.share_weights_across_joints ? 0 : joint]; }
  nn::Linear<Real>& fc() noexcept { return fc_; }

 private:
  StreamConfig cfg_;
  std::vector<PlaneCnn<Real>> cnns_;
  nn::Linear<Real> fc_;
};

/// Stacks scalograms into the [B*V*2, 1, F, L] plane batch.
template <typename Real>
nn::Tensor<Real> stack_planes(const std::vector<const cwt::Scalogram*>& batch);

}  // namespace gaitwave::stream
