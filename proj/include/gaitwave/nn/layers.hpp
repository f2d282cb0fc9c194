#pragma once

#include <string>

#include "gaitwave/nn/ops.hpp"
#include "gaitwave/nn/params.hpp"

namespace gaitwave::nn {

/// Bias-free same-padded convolution with He-initialized weights.
template <typename Real>
struct Conv2d {
  Tensor<Real> weight;
  Conv2dOptions options;

  Conv2d() = default;
  Conv2d(ParamStore<Real>& store, const std::string& name, int in_ch, int out_ch, int kh, int kw, Rng& rng)
      : weight(store.add_param(name + ".weight", {out_ch, in_ch, kh, kw})), options(Conv2dOptions::same(kh, kw)) {
    kaiming_uniform(weight, in_ch * kh * kw, rng);
  }

  Tensor<Real> operator()(const Tensor<Real>& x) const { return conv2d(x, weight, options); }
};

template <typename Real>
struct BatchNorm {
  Tensor<Real> gamma, beta, running_mean, running_var;
  BatchNormOptions options;

  BatchNorm() = default;
  BatchNorm(ParamStore<Real>& store, const std::string& name, int channels)
      : gamma(store.add_param(name + ".gamma", {channels})),
        beta(store.add_param(name + ".beta", {channels})),
        running_mean(store.add_buffer(name + ".running_mean", {channels}, Real(0))),
        running_var(store.add_buffer(name + ".running_var", {channels}, Real(1))) {
    std::fill(gamma.data().begin(), gamma.data().end(), Real(1));
  }

  Tensor<Real> operator()(const Tensor<Real>& x, bool training) {
    auto opt = options;
    opt.training = training;
    return batch_norm(x, gamma, beta, running_mean, running_var, opt);
  }
};

template <typename Real>
struct Linear {
  Tensor<Real> weight, bias;

  Linear() = default;
  Linear(ParamStore<Real>& store, const std::string& name, int in, int out, Rng& rng)
      : weight(store.add_param(name + ".weight", {out, in})), bias(store.add_param(name + ".bias", {out})) {
    fan_in_uniform(weight, in, rng);
    fan_in_uniform(bias, in, rng);
  }

  Tensor<Real> operator()(const Tensor<Real>& x) const { return linear(x, weight, bias); }
};

/// conv -> BN -> ReLU.
template <typename Real>
struct ConvBnRelu {
  Conv2d<Real> conv;
  BatchNorm<Real> bn;

  ConvBnRelu() = default;
  ConvBnRelu(ParamStore<Real>& store, const std::string& name, int in_ch, int out_ch, int kh, int kw, Rng& rng)
      : conv(store, name + ".conv", in_ch, out_ch, kh, kw, rng), bn(store, name + ".bn", out_ch) {}

  Tensor<Real> operator()(const Tensor<Real>& x, bool training) { return relu(bn(conv(x), training)); }
};

}  // namespace gaitwave::nn
