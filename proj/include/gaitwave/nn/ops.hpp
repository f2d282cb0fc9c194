#pragma once

#include <vector>

#include "gaitwave/nn/tensor.hpp"

namespace gaitwave::nn {

struct Conv2dOptions {
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;

  /// Same padding for an odd kh x kw kernel at stride 1.
  static Conv2dOptions same(int kh, int kw);
};

/// Cross-correlation of x [N,C,H,W] with kernel [Co,C,kh,kw]; no bias.
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& kernel, const Conv2dOptions& opt);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;  // variance floor
};

/// Per-channel normalization of x [N,C,...] over every axis but 1. In
/// training mode batch statistics are used and the running estimates are
/// updated in place (unbiased variance); in eval mode the running estimates
/// are used.
template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        Tensor<Real>& running_mean, Tensor<Real>& running_var, const BatchNormOptions& opt);

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x);

/// [N,C,H,W] -> [N,C], mean over (H,W).
template <typename Real>
Tensor<Real> global_avg_pool(const Tensor<Real>& x);

/// Concatenation along `axis`; all other dims must agree.
template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, int axis);

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);

/// Gathers rows (axis-0 slices) of x in the given order.
template <typename Real>
Tensor<Real> take_rows(const Tensor<Real>& x, const std::vector<int>& rows);

/// x [N,in] · W[out,in]^T + b[out]; pass an undefined bias to skip it.
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias);

inline constexpr double kL2Floor = 1e-12;

/// Row-wise x / max(||x||_2, 1e-12) for x [N,D].
template <typename Real>
Tensor<Real> l2_normalize(const Tensor<Real>& x);

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x);

template <typename Real>
Tensor<Real> sum_squares(const Tensor<Real>& x);

/// sum_i x[i] * w[i]; w is treated as a constant.
template <typename Real>
Tensor<Real> weighted_sum(const Tensor<Real>& x, const std::vector<Real>& w);

}  // namespace gaitwave::nn
