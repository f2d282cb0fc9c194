#include "gaitwave/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "gaitwave/parallel.hpp"

namespace gaitwave::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::ShapeMismatch, what);
}

// Fixed 16-lane accumulation: vectorizes without reassociating, so the result
// is identical for every build of the same code.
template <typename Real>
Real dot(const Real* __restrict a, const Real* __restrict b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  Real lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += a[i + l] * b[i + l];
  for (std::size_t l = 0; i < n; ++i, ++l) lanes[l] += a[i] * b[i];
  Real acc = 0;
  for (std::size_t l = 0; l < kLanes; ++l) acc += lanes[l];
  return acc;
}

template <typename Real>
void axpy(Real* __restrict y, const Real* __restrict x, Real alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename Real>
void mul_acc(Real* __restrict acc, const Real* __restrict a, const Real* __restrict b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

// acc[i] += sum_k w[k] * src[i + k] for i < n, one pass per kernel row.
template <int KW, typename Real>
void tap_row_fixed(Real* __restrict acc, const Real* __restrict src, const Real* __restrict w, std::size_t n) {
  Real wk[KW];
  for (int k = 0; k < KW; ++k) wk[k] = w[k];
  for (std::size_t i = 0; i < n; ++i) {
    Real v = acc[i];
    for (int k = 0; k < KW; ++k) v += wk[k] * src[i + k];
    acc[i] = v;
  }
}

template <typename Real>
void tap_row(Real* acc, const Real* src, const Real* w, int kw, std::size_t n) {
  switch (kw) {
    case 1: return tap_row_fixed<1>(acc, src, w, n);
    case 3: return tap_row_fixed<3>(acc, src, w, n);
    case 5: return tap_row_fixed<5>(acc, src, w, n);
    case 7: return tap_row_fixed<7>(acc, src, w, n);
    default:
      for (int k = 0; k < kw; ++k) axpy(acc, src + k, w[k], n);
  }
}

// Sums in eight double lanes so the loop vectorizes with a fixed order.
template <typename Real>
double lane_sum(const Real* __restrict p, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += static_cast<double>(p[i + l]);
  for (std::size_t l = 0; i < n; ++i, ++l) lanes[l] += static_cast<double>(p[i]);
  double acc = 0.0;
  for (double v : lanes) acc += v;
  return acc;
}

// sum (p[i] - m)^2 and sum a[i] * b[i], same lane scheme.
template <typename Real>
double lane_sq_dev(const Real* __restrict p, double m, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double d = static_cast<double>(p[i + l]) - m;
      lanes[l] += d * d;
    }
  for (std::size_t l = 0; i < n; ++i, ++l) {
    const double d = static_cast<double>(p[i]) - m;
    lanes[l] += d * d;
  }
  double acc = 0.0;
  for (double v : lanes) acc += v;
  return acc;
}

template <typename Real>
double lane_dot(const Real* __restrict a, const Real* __restrict b, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
  for (std::size_t l = 0; i < n; ++i, ++l) lanes[l] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  double acc = 0.0;
  for (double v : lanes) acc += v;
  return acc;
}

// Output indices o in [lo, hi) whose input position o*stride + k - pad lies in [0, size).
struct Range {
  int lo, hi;
};

Range valid_outputs(int out_size, int in_size, int stride, int k, int pad) {
  // need 0 <= o*stride + k - pad <= in_size - 1
  const int a = pad - k;
  int lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  const int b = in_size - 1 + pad - k;
  int hi = b < 0 ? 0 : b / stride + 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, out_size);
  return {lo, std::max(lo, hi)};
}

std::size_t spatial_of(const Shape& s) {
  std::size_t p = 1;
  for (std::size_t i = 2; i < s.size(); ++i) p *= static_cast<std::size_t>(s[i]);
  return p;
}

}  // namespace

Conv2dOptions Conv2dOptions::same(int kh, int kw) {
  require(kh % 2 == 1 && kw % 2 == 1, "same padding needs odd kernel sizes");
  return Conv2dOptions{1, 1, kh / 2, kw / 2};
}

template <typename Real>
Tensor<Real> conv2d_strided(const Tensor<Real>& x, const Tensor<Real>& kernel, const Conv2dOptions& opt) {
  require(x.rank() == 4 && kernel.rank() == 4, "conv2d expects [N,C,H,W] input and [Co,C,kh,kw] kernel");
  require(x.dim(1) == kernel.dim(1),
          "conv2d channel mismatch: input " + shape_str(x.shape()) + " vs kernel " + shape_str(kernel.shape()));
  require(opt.stride_h >= 1 && opt.stride_w >= 1 && opt.pad_h >= 0 && opt.pad_w >= 0, "conv2d bad stride/padding");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int Ho = (H + 2 * opt.pad_h - kh) / opt.stride_h + 1;
  const int Wo = (W + 2 * opt.pad_w - kw) / opt.stride_w + 1;
  require(Ho >= 1 && Wo >= 1, "conv2d kernel larger than padded input");
  const int sh = opt.stride_h, sw = opt.stride_w, ph = opt.pad_h, pw = opt.pad_w;

  std::vector<Real> out(static_cast<std::size_t>(N) * Co * Ho * Wo, Real(0));
  const Real* xd = x.data().data();
  const Real* kd = kernel.data().data();
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(Ho) * Wo;

  parallel_for(N, [&](std::size_t n) {
    for (int co = 0; co < Co; ++co) {
      Real* op = out.data() + (n * Co + co) * out_plane;
      for (int ci = 0; ci < C; ++ci) {
        const Real* ip = xd + (n * C + ci) * in_plane;
        for (int ky = 0; ky < kh; ++ky) {
          const Range ry = valid_outputs(Ho, H, sh, ky, ph);
          for (int kx = 0; kx < kw; ++kx) {
            const Range rx = valid_outputs(Wo, W, sw, kx, pw);
            if (rx.hi <= rx.lo) continue;
            const Real wv = kd[((static_cast<std::size_t>(co) * C + ci) * kh + ky) * kw + kx];
            for (int oy = ry.lo; oy < ry.hi; ++oy) {
              const int iy = oy * sh + ky - ph;
              Real* orow = op + static_cast<std::size_t>(oy) * Wo;
              const Real* irow = ip + static_cast<std::size_t>(iy) * W;
              if (sw == 1) {
                axpy(orow + rx.lo, irow + rx.lo + kx - pw, wv, static_cast<std::size_t>(rx.hi - rx.lo));
              } else {
                for (int ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * irow[ox * sw + kx - pw];
              }
            }
          }
        }
      }
    }
  });

  Tensor<Real> xin = x, kin = kernel;
  return make_result<Real>({N, Co, Ho, Wo}, std::move(out), {&x, &kernel}, [=](TensorImpl<Real>& self) mutable {
    const Real* g = self.grad.data();
    const Real* xd2 = xin.data().data();
    const Real* kd2 = kin.data().data();
    if (xin.requires_grad()) {
      Real* gx = xin.grad().data();
      parallel_for(N, [&](std::size_t n) {
        for (int co = 0; co < Co; ++co) {
          const Real* gp = g + (n * Co + co) * out_plane;
          for (int ci = 0; ci < C; ++ci) {
            Real* gxp = gx + (n * C + ci) * in_plane;
            for (int ky = 0; ky < kh; ++ky) {
              const Range ry = valid_outputs(Ho, H, sh, ky, ph);
              for (int kx = 0; kx < kw; ++kx) {
                const Range rx = valid_outputs(Wo, W, sw, kx, pw);
                if (rx.hi <= rx.lo) continue;
                const Real wv = kd2[((static_cast<std::size_t>(co) * C + ci) * kh + ky) * kw + kx];
                for (int oy = ry.lo; oy < ry.hi; ++oy) {
                  const int iy = oy * sh + ky - ph;
                  const Real* grow = gp + static_cast<std::size_t>(oy) * Wo;
                  Real* gxrow = gxp + static_cast<std::size_t>(iy) * W;
                  if (sw == 1) {
                    axpy(gxrow + rx.lo + kx - pw, grow + rx.lo, wv, static_cast<std::size_t>(rx.hi - rx.lo));
                  } else {
                    for (int ox = rx.lo; ox < rx.hi; ++ox) gxrow[ox * sw + kx - pw] += wv * grow[ox];
                  }
                }
              }
            }
          }
        }
      });
    }
    if (kin.requires_grad()) {
      Real* gk = kin.grad().data();
      parallel_for(Co, [&](std::size_t co) {
        std::vector<Real> lanes(static_cast<std::size_t>(Wo));
        for (int ci = 0; ci < C; ++ci)
          for (int ky = 0; ky < kh; ++ky) {
            const Range ry = valid_outputs(Ho, H, sh, ky, ph);
            for (int kx = 0; kx < kw; ++kx) {
              const Range rx = valid_outputs(Wo, W, sw, kx, pw);
              if (rx.hi <= rx.lo || ry.hi <= ry.lo) continue;
              const auto len = static_cast<std::size_t>(rx.hi - rx.lo);
              std::fill(lanes.begin(), lanes.begin() + static_cast<std::ptrdiff_t>(len), Real(0));
              for (int n = 0; n < N; ++n) {
                const Real* gp = g + (static_cast<std::size_t>(n) * Co + co) * out_plane;
                const Real* ip = xd2 + (static_cast<std::size_t>(n) * C + ci) * in_plane;
                for (int oy = ry.lo; oy < ry.hi; ++oy) {
                  const int iy = oy * sh + ky - ph;
                  const Real* grow = gp + static_cast<std::size_t>(oy) * Wo + rx.lo;
                  const Real* irow = ip + static_cast<std::size_t>(iy) * W;
                  if (sw == 1) {
                    mul_acc(lanes.data(), grow, irow + rx.lo + kx - pw, len);
                  } else {
                    for (std::size_t l = 0; l < len; ++l) lanes[l] += grow[l] * irow[(rx.lo + l) * sw + kx - pw];
                  }
                }
              }
              Real acc = 0;
              for (std::size_t l = 0; l < len; ++l) acc += lanes[l];
              gk[((co * C + ci) * kh + ky) * kw + kx] += acc;
            }
          }
      });
    }
  });
}

// Stride-1 path. Each plane is copied into a zero-padded Hp x Wp buffer;
// output row oy then lives at offset oy*Wp of a flat accumulator, so every
// kernel tap becomes one contiguous axpy over (Ho-1)*Wp + Wo elements. The
// Wp - Wo trailing columns of each accumulator row are scratch.
template <typename Real>
Tensor<Real> conv2d_unit_stride(const Tensor<Real>& x, const Tensor<Real>& kernel, const Conv2dOptions& opt) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int ph = opt.pad_h, pw = opt.pad_w;
  const int Hp = H + 2 * ph, Wp = W + 2 * pw;
  const int Ho = Hp - kh + 1, Wo = Wp - kw + 1;
  require(Ho >= 1 && Wo >= 1, "conv2d kernel larger than padded input");
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t pad_plane = static_cast<std::size_t>(Hp) * Wp;
  const std::size_t out_plane = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t span = static_cast<std::size_t>(Ho - 1) * Wp + Wo;
  const std::size_t acc_plane = static_cast<std::size_t>(Ho) * Wp;

  const auto pad_input = [=](const Real* src, Real* dst) {
    std::fill(dst, dst + pad_plane, Real(0));
    for (int y = 0; y < H; ++y)
      std::copy_n(src + static_cast<std::size_t>(y) * W, W, dst + static_cast<std::size_t>(y + ph) * Wp + pw);
  };
  const auto tap = [=](int co, int ci, int ky, int kx) {
    return ((static_cast<std::size_t>(co) * C + ci) * kh + ky) * kw + kx;
  };

  std::vector<Real> out(static_cast<std::size_t>(N) * Co * out_plane);
  const Real* xd = x.data().data();
  const Real* kd = kernel.data().data();
  parallel_for(N, [&](std::size_t n) {
    std::vector<Real> xp(static_cast<std::size_t>(C) * pad_plane);
    std::vector<Real> acc(static_cast<std::size_t>(Co) * acc_plane, Real(0));
    for (int ci = 0; ci < C; ++ci) pad_input(xd + (n * C + ci) * in_plane, xp.data() + ci * pad_plane);
    for (int co = 0; co < Co; ++co)
      for (int ci = 0; ci < C; ++ci)
        for (int ky = 0; ky < kh; ++ky)
          tap_row(acc.data() + co * acc_plane, xp.data() + ci * pad_plane + static_cast<std::size_t>(ky) * Wp,
                  kd + tap(co, ci, ky, 0), kw, span);
    for (int co = 0; co < Co; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        std::copy_n(acc.data() + co * acc_plane + static_cast<std::size_t>(oy) * Wp, Wo,
                    out.data() + (n * Co + co) * out_plane + static_cast<std::size_t>(oy) * Wo);
  });

  Tensor<Real> xin = x, kin = kernel;
  return make_result<Real>({N, Co, Ho, Wo}, std::move(out), {&x, &kernel}, [=](TensorImpl<Real>& self) mutable {
    const Real* g = self.grad.data();
    const Real* xd2 = xin.data().data();
    const Real* kd2 = kin.data().data();
    // Output gradient of one (n, co) laid out like the accumulator, scratch columns zeroed.
    const auto pad_grad = [=](std::size_t n, int co, Real* dst) {
      std::fill(dst, dst + acc_plane, Real(0));
      const Real* src = g + (n * Co + co) * out_plane;
      for (int oy = 0; oy < Ho; ++oy)
        std::copy_n(src + static_cast<std::size_t>(oy) * Wo, Wo, dst + static_cast<std::size_t>(oy) * Wp);
    };
    if (xin.requires_grad()) {
      Real* gx = xin.grad().data();
      parallel_for(N, [&](std::size_t n) {
        // Transposed correlation: each gradient plane gets kw - 1 zeros on both
        // sides and is correlated with the horizontally flipped kernel row.
        const std::size_t edge = static_cast<std::size_t>(kw - 1);
        const std::size_t gstride = acc_plane + 2 * edge;
        std::vector<Real> gp(static_cast<std::size_t>(Co) * gstride, Real(0));
        for (int co = 0; co < Co; ++co) pad_grad(n, co, gp.data() + co * gstride + edge);
        std::vector<Real> gxp(static_cast<std::size_t>(C) * pad_plane, Real(0));
        std::vector<Real> flipped(static_cast<std::size_t>(kw));
        for (int ci = 0; ci < C; ++ci)
          for (int co = 0; co < Co; ++co)
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) flipped[kx] = kd2[tap(co, ci, ky, kw - 1 - kx)];
              tap_row(gxp.data() + ci * pad_plane + static_cast<std::size_t>(ky) * Wp, gp.data() + co * gstride,
                      flipped.data(), kw, span + edge);
            }
        for (int ci = 0; ci < C; ++ci)
          for (int y = 0; y < H; ++y) {
            const Real* src = gxp.data() + ci * pad_plane + static_cast<std::size_t>(y + ph) * Wp + pw;
            Real* dst = gx + (n * C + ci) * in_plane + static_cast<std::size_t>(y) * W;
            for (int xx = 0; xx < W; ++xx) dst[xx] += src[xx];
          }
      });
    }
    if (kin.requires_grad()) {
      Real* gk = kin.grad().data();
      // One task per output channel; samples are summed in index order.
      parallel_for(Co, [&](std::size_t co) {
        const std::size_t taps = static_cast<std::size_t>(C) * kh * kw;
        std::vector<Real> acc(taps, Real(0));
        std::vector<Real> xp(static_cast<std::size_t>(C) * pad_plane), gp(acc_plane);
        for (int n = 0; n < N; ++n) {
          pad_grad(n, static_cast<int>(co), gp.data());
          for (int ci = 0; ci < C; ++ci) pad_input(xd2 + (static_cast<std::size_t>(n) * C + ci) * in_plane, xp.data() + ci * pad_plane);
          for (int ci = 0; ci < C; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx)
                acc[(static_cast<std::size_t>(ci) * kh + ky) * kw + kx] +=
                    dot(gp.data(), xp.data() + ci * pad_plane + static_cast<std::size_t>(ky) * Wp + kx, span);
        }
        for (std::size_t i = 0; i < taps; ++i) gk[co * taps + i] += acc[i];
      });
    }
  });
}

template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& kernel, const Conv2dOptions& opt) {
  require(x.rank() == 4 && kernel.rank() == 4, "conv2d expects [N,C,H,W] input and [Co,C,kh,kw] kernel");
  require(x.dim(1) == kernel.dim(1),
          "conv2d channel mismatch: input " + shape_str(x.shape()) + " vs kernel " + shape_str(kernel.shape()));
  require(opt.stride_h >= 1 && opt.stride_w >= 1 && opt.pad_h >= 0 && opt.pad_w >= 0, "conv2d bad stride/padding");
  if (opt.stride_h == 1 && opt.stride_w == 1) return conv2d_unit_stride(x, kernel, opt);
  return conv2d_strided(x, kernel, opt);
}

template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        Tensor<Real>& running_mean, Tensor<Real>& running_var, const BatchNormOptions& opt) {
  require(x.rank() >= 2, "batch_norm expects [N,C,...]");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t S = spatial_of(x.shape());
  require(gamma.numel() == static_cast<std::size_t>(C) && beta.numel() == static_cast<std::size_t>(C) &&
              running_mean.numel() == static_cast<std::size_t>(C) && running_var.numel() == static_cast<std::size_t>(C),
          "batch_norm parameter size does not match channel count " + std::to_string(C));
  const std::size_t count = static_cast<std::size_t>(N) * S;
  require(count >= 1, "batch_norm on empty input");
  const Real* xd = x.data().data();
  const auto plane = [&](int n, int c) { return (static_cast<std::size_t>(n) * C + c) * S; };

  std::vector<Real> mean(C), inv_std(C);
  if (opt.training) {
    std::vector<double> sums(C, 0.0), sq(C, 0.0);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) sums[c] += lane_sum(xd + plane(n, c), S);
    for (int c = 0; c < C; ++c) sums[c] /= static_cast<double>(count);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) sq[c] += lane_sq_dev(xd + plane(n, c), sums[c], S);
    for (int c = 0; c < C; ++c) {
      const double m = sums[c];
      const double var = sq[c] / static_cast<double>(count);
      mean[c] = static_cast<Real>(m);
      inv_std[c] = static_cast<Real>(1.0 / std::sqrt(var + opt.eps));
      const double unbiased = count > 1 ? sq[c] / static_cast<double>(count - 1) : var;
      auto& rm = running_mean.data()[c];
      auto& rv = running_var.data()[c];
      rm = static_cast<Real>((1.0 - opt.momentum) * rm + opt.momentum * m);
      rv = static_cast<Real>((1.0 - opt.momentum) * rv + opt.momentum * unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean.data()[c];
      inv_std[c] = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + opt.eps));
    }
  }

  std::vector<Real> xhat(x.numel()), out(x.numel());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const std::size_t base = plane(n, c);
      const Real m = mean[c], is = inv_std[c], ga = gamma.data()[c], be = beta.data()[c];
      for (std::size_t i = 0; i < S; ++i) {
        const Real h = (xd[base + i] - m) * is;
        xhat[base + i] = h;
        out[base + i] = ga * h + be;
      }
    }

  Tensor<Real> xin = x, gin = gamma, bin = beta;
  const bool training = opt.training;
  return make_result<Real>(x.shape(), std::move(out), {&x, &gamma, &beta},
                           [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl<Real>& self) mutable {
    const Real* g = self.grad.data();
    const auto plane2 = [&](int n, int c) { return (static_cast<std::size_t>(n) * C + c) * S; };
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        sum_g[c] += lane_sum(g + plane2(n, c), S);
        sum_gx[c] += lane_dot(g + plane2(n, c), xhat.data() + plane2(n, c), S);
      }
    if (gin.requires_grad()) {
      auto gg = gin.grad();
      for (int c = 0; c < C; ++c) gg[c] += static_cast<Real>(sum_gx[c]);
    }
    if (bin.requires_grad()) {
      auto gb = bin.grad();
      for (int c = 0; c < C; ++c) gb[c] += static_cast<Real>(sum_g[c]);
    }
    if (xin.requires_grad()) {
      Real* gx = xin.grad().data();
      const double inv_count = 1.0 / static_cast<double>(count);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const std::size_t base = plane2(n, c);
          const Real scale = gin.data()[c] * inv_std[c];
          Real* __restrict dst = gx + base;
          const Real* __restrict gs = g + base;
          const Real* __restrict hs = xhat.data() + base;
          if (training) {
            const Real mg = static_cast<Real>(sum_g[c] * inv_count);
            const Real mgx = static_cast<Real>(sum_gx[c] * inv_count);
            for (std::size_t i = 0; i < S; ++i) dst[i] += scale * (gs[i] - mg - hs[i] * mgx);
          } else {
            for (std::size_t i = 0; i < S; ++i) dst[i] += scale * gs[i];
          }
        }
    }
  });
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  std::vector<Real> out(x.numel());
  const Real* xd = x.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > Real(0) ? xd[i] : Real(0);
  Tensor<Real> xin = x;
  return make_result<Real>(x.shape(), std::move(out), {&x}, [xin](TensorImpl<Real>& self) mutable {
    Real* __restrict gx = xin.grad().data();
    const Real* __restrict xs = xin.data().data();
    const Real* __restrict g = self.grad.data();
    const std::size_t n = self.grad.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += xs[i] > Real(0) ? g[i] : Real(0);
  });
}

template <typename Real>
Tensor<Real> global_avg_pool(const Tensor<Real>& x) {
  require(x.rank() == 4, "global_avg_pool expects [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t S = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  std::vector<Real> out(static_cast<std::size_t>(N) * C);
  const Real* xd = x.data().data();
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    double s = 0.0;
    for (std::size_t i = 0; i < S; ++i) s += xd[nc * S + i];
    out[nc] = static_cast<Real>(s / static_cast<double>(S));
  }
  Tensor<Real> xin = x;
  return make_result<Real>({N, C}, std::move(out), {&x}, [xin, S](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    const Real inv = Real(1) / static_cast<Real>(S);
    for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
      const Real gv = self.grad[nc] * inv;
      for (std::size_t i = 0; i < S; ++i) gx[nc * S + i] += gv;
    }
  });
}

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, int axis) {
  require(!parts.empty(), "concat of nothing");
  const int rank = parts.front().rank();
  require(axis >= 0 && axis < rank, "concat axis out of range");
  Shape shape = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    require(p.rank() == rank, "concat rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis) require(p.dim(d) == shape[d], "concat shape mismatch: " + shape_str(p.shape()) + " vs " + shape_str(shape));
    total += p.dim(axis);
  }
  shape[axis] = total;
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(shape[d]);
  for (int d = axis + 1; d < rank; ++d) inner *= static_cast<std::size_t>(shape[d]);
  std::vector<Real> out(numel(shape));
  const std::size_t row = static_cast<std::size_t>(total) * inner;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = static_cast<std::size_t>(p.dim(axis)) * inner;
    const Real* src = p.data().data();
    for (std::size_t o = 0; o < outer; ++o) std::copy(src + o * chunk, src + (o + 1) * chunk, out.data() + o * row + offset);
    offset += chunk;
  }
  std::vector<Tensor<Real>> ins = parts;
  return make_result<Real>(shape, std::move(out), parts, [ins, axis, outer, inner, row](TensorImpl<Real>& self) mutable {
    std::size_t off = 0;
    for (auto& p : ins) {
      const std::size_t chunk = static_cast<std::size_t>(p.dim(axis)) * inner;
      if (p.requires_grad()) {
        auto gp = p.grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += self.grad[o * row + off + i];
      }
      off += chunk;
    }
  });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
  require(numel(shape) == x.numel(), "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<Real> out(x.data().begin(), x.data().end());
  Tensor<Real> xin = x;
  return make_result<Real>(std::move(shape), std::move(out), {&x}, [xin](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

template <typename Real>
Tensor<Real> take_rows(const Tensor<Real>& x, const std::vector<int>& rows) {
  require(x.rank() >= 1, "take_rows on scalar");
  const std::size_t stride = x.dim(0) ? x.numel() / static_cast<std::size_t>(x.dim(0)) : 0;
  Shape shape = x.shape();
  shape[0] = static_cast<int>(rows.size());
  std::vector<Real> out(rows.size() * stride);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] >= 0 && rows[r] < x.dim(0), "take_rows index out of range");
    std::copy_n(x.data().data() + static_cast<std::size_t>(rows[r]) * stride, stride, out.data() + r * stride);
  }
  Tensor<Real> xin = x;
  return make_result<Real>(std::move(shape), std::move(out), {&x}, [xin, rows, stride](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t i = 0; i < stride; ++i) gx[static_cast<std::size_t>(rows[r]) * stride + i] += self.grad[r * stride + i];
  });
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && x.dim(1) == weight.dim(1),
          "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  const int N = x.dim(0), in = x.dim(1), outd = weight.dim(0);
  require(!bias.defined() || bias.numel() == static_cast<std::size_t>(outd), "linear: bias size mismatch");
  std::vector<Real> out(static_cast<std::size_t>(N) * outd);
  const Real* xd = x.data().data();
  const Real* wd = weight.data().data();
  parallel_for(N, [&](std::size_t n) {
    for (int o = 0; o < outd; ++o) {
      Real v = dot(xd + n * in, wd + static_cast<std::size_t>(o) * in, static_cast<std::size_t>(in));
      if (bias.defined()) v += bias.data()[o];
      out[n * outd + o] = v;
    }
  });
  Tensor<Real> xin = x, win = weight, bin = bias;
  return make_result<Real>({N, outd}, std::move(out), {&x, &weight, &bias}, [=](TensorImpl<Real>& self) mutable {
    const Real* g = self.grad.data();
    if (xin.requires_grad()) {
      Real* gx = xin.grad().data();
      const Real* wd2 = win.data().data();
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < outd; ++o)
          axpy(gx + static_cast<std::size_t>(n) * in, wd2 + static_cast<std::size_t>(o) * in, g[n * outd + o],
               static_cast<std::size_t>(in));
    }
    if (win.requires_grad()) {
      Real* gw = win.grad().data();
      const Real* xd2 = xin.data().data();
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < outd; ++o)
          axpy(gw + static_cast<std::size_t>(o) * in, xd2 + static_cast<std::size_t>(n) * in, g[n * outd + o],
               static_cast<std::size_t>(in));
    }
    if (bin.defined() && bin.requires_grad()) {
      auto gb = bin.grad();
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < outd; ++o) gb[o] += g[n * outd + o];
    }
  });
}

template <typename Real>
Tensor<Real> l2_normalize(const Tensor<Real>& x) {
  require(x.rank() == 2, "l2_normalize expects [N,D]");
  const int N = x.dim(0), D = x.dim(1);
  std::vector<Real> out(x.numel());
  std::vector<Real> denom(N);
  const Real* xd = x.data().data();
  for (int n = 0; n < N; ++n) {
    double s = 0.0;
    for (int d = 0; d < D; ++d) s += static_cast<double>(xd[n * D + d]) * xd[n * D + d];
    const double norm = std::sqrt(s);
    denom[n] = static_cast<Real>(std::max(norm, kL2Floor));
    for (int d = 0; d < D; ++d) out[n * D + d] = static_cast<Real>(xd[n * D + d] / static_cast<double>(denom[n]));
  }
  Tensor<Real> xin = x;
  std::vector<Real> y = out;
  return make_result<Real>(x.shape(), std::move(out), {&x}, [=](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    const Real* g = self.grad.data();
    for (int n = 0; n < N; ++n) {
      const bool clamped = static_cast<double>(denom[n]) <= kL2Floor;
      double yg = 0.0;
      if (!clamped)
        for (int d = 0; d < D; ++d) yg += static_cast<double>(y[n * D + d]) * g[n * D + d];
      for (int d = 0; d < D; ++d)
        gx[n * D + d] += static_cast<Real>((g[n * D + d] - (clamped ? 0.0 : y[n * D + d] * yg)) / denom[n]);
    }
  });
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
  double s = 0.0;
  for (Real v : x.data()) s += v;
  Tensor<Real> xin = x;
  return make_result<Real>({1}, {static_cast<Real>(s)}, {&x}, [xin](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    for (auto& v : gx) v += self.grad[0];
  });
}

template <typename Real>
Tensor<Real> sum_squares(const Tensor<Real>& x) {
  double s = 0.0;
  for (Real v : x.data()) s += static_cast<double>(v) * v;
  Tensor<Real> xin = x;
  return make_result<Real>({1}, {static_cast<Real>(s)}, {&x}, [xin](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    const auto xd = xin.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += Real(2) * xd[i] * self.grad[0];
  });
}

template <typename Real>
Tensor<Real> weighted_sum(const Tensor<Real>& x, const std::vector<Real>& w) {
  require(w.size() == x.numel(), "weighted_sum weight length mismatch");
  double s = 0.0;
  const auto xd = x.data();
  for (std::size_t i = 0; i < w.size(); ++i) s += static_cast<double>(xd[i]) * w[i];
  Tensor<Real> xin = x;
  return make_result<Real>({1}, {static_cast<Real>(s)}, {&x}, [xin, w](TensorImpl<Real>& self) mutable {
    auto gx = xin.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += w[i] * self.grad[0];
  });
}

#define GAITWAVE_INSTANTIATE_OPS(Real)                                                                             \
  template Tensor<Real> conv2d(const Tensor<Real>&, const Tensor<Real>&, const Conv2dOptions&);                   \
  template Tensor<Real> batch_norm(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, Tensor<Real>&,  \
                                   Tensor<Real>&, const BatchNormOptions&);                                       \
  template Tensor<Real> relu(const Tensor<Real>&);                                                                \
  template Tensor<Real> global_avg_pool(const Tensor<Real>&);                                                     \
  template Tensor<Real> concat(const std::vector<Tensor<Real>>&, int);                                            \
  template Tensor<Real> reshape(const Tensor<Real>&, Shape);                                                      \
  template Tensor<Real> take_rows(const Tensor<Real>&, const std::vector<int>&);                                  \
  template Tensor<Real> linear(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);                    \
  template Tensor<Real> l2_normalize(const Tensor<Real>&);                                                        \
  template Tensor<Real> sum(const Tensor<Real>&);                                                                 \
  template Tensor<Real> sum_squares(const Tensor<Real>&);                                                         \
  template Tensor<Real> weighted_sum(const Tensor<Real>&, const std::vector<Real>&);

GAITWAVE_INSTANTIATE_OPS(float)
GAITWAVE_INSTANTIATE_OPS(double)

}  // namespace gaitwave::nn
