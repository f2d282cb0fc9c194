#pragma once

#include <complex>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaitwave/skeleton.hpp"

namespace gaitwave::cwt {

using Complex = std::complex<double>;

// Codes follow the usual mother-wavelet names: morl, mexh, gaus1, shan.
// cmor is the analytic (complex) Morlet, available as an alternative to the
// real morl convention.
enum class WaveletKind { Morlet, MexicanHat, Gaussian1, Shannon, ComplexMorlet };

std::string_view code(WaveletKind kind);
WaveletKind parse_wavelet(std::string_view code);

/// A unit-L2-norm mother wavelet.
///
/// Closed forms (t in units of the mother wavelet):
///   morl   C * cos(w0 t) exp(-t^2/2),   C = pi^-1/4 * sqrt(2 / (1 + exp(-w0^2)))
///   cmor   pi^-1/4 * exp(i w0 t) exp(-t^2/2)
///   mexh   2 / (sqrt(3) pi^1/4) * (1 - t^2) exp(-t^2/2)
///   gaus1  (2/pi)^1/4 * (-2t) exp(-t^2)
///   shan   sqrt(b) * sinc(b t) * exp(i 2 pi c t),  sinc(x) = sin(pi x)/(pi x)
/// Outside [-effective_support, effective_support] the wavelet is taken as 0;
/// the support is chosen so that less than 1e-8 of the L2 mass is dropped.
struct MotherWavelet {
  WaveletKind kind = WaveletKind::Morlet;
  double omega0 = 5.0;     // Morlet family
  double bandwidth = 1.5;  // Shannon b
  double center = 1.0;     // Shannon c

  static MotherWavelet make(WaveletKind kind) { return MotherWavelet{kind}; }

  bool complex_valued() const noexcept;
  double effective_support() const noexcept;
  /// Pseudo-period (in units of t) of the wavelet at scale 1, i.e. 2*pi over
  /// the angular frequency where |psi_hat| peaks.
  double unit_period() const noexcept;
};

Complex eval_wavelet(const MotherWavelet& w, double t);

/// Log-spaced scales whose pseudo-periods run from period_min to period_max.
struct ScaleGrid {
  std::vector<double> scales;
  double unit_period = 1.0;

  int size() const noexcept { return static_cast<int>(scales.size()); }
  double period_of_scale(double s) const noexcept { return s * unit_period; }
  double period(int i) const noexcept { return scales[i] * unit_period; }
  /// Index whose pseudo-period is nearest `period` in log distance.
  int nearest_index(double period) const;
};

ScaleGrid make_scale_grid(int num_scales, double period_min, double period_max, const MotherWavelet& w);

/// CWT coefficients of one signal, coef[scale][tau].
struct RawScalogram {
  int scales = 0;
  int length = 0;
  std::vector<Complex> coef;

  Complex at(int i, int tau) const noexcept { return coef[static_cast<std::size_t>(i) * length + tau]; }
  double magnitude(int i, int tau) const noexcept { return std::abs(at(i, tau)); }
};

/// Reference path: W[i,tau] = s_i^-1/2 * sum_t v[t] conj(psi((t - tau)/s_i)),
/// zero padding outside [0, L).
RawScalogram cwt_direct(std::span<const double> v, const ScaleGrid& grid, const MotherWavelet& w);

/// FFT kernels for one (grid, wavelet, signal length). Built once and shared
/// read-only; transform() is safe to call concurrently.
class CwtKernelTable {
 public:
  CwtKernelTable(const ScaleGrid& grid, const MotherWavelet& w, int length);
  ~CwtKernelTable();
  CwtKernelTable(const CwtKernelTable&) = delete;
  CwtKernelTable& operator=(const CwtKernelTable&) = delete;

  int length() const noexcept { return length_; }
  int scales() const noexcept { return static_cast<int>(grid_.scales.size()); }
  const ScaleGrid& grid() const noexcept { return grid_; }
  const MotherWavelet& wavelet() const noexcept { return wavelet_; }

  RawScalogram transform(std::span<const double> v) const;

 private:
  struct Plans;
  ScaleGrid grid_;
  MotherWavelet wavelet_;
  int length_;
  int fft_size_;
  std::vector<Complex> kernels_;  // [scale][fft_size] spectra
  std::unique_ptr<Plans> plans_;
};

/// FFT path; same contract as cwt_direct.
RawScalogram cwt_fast(std::span<const double> v, const ScaleGrid& grid, const MotherWavelet& w);

/// Argmax over scales of the time-averaged |W|; ties go to the smaller index.
int find_ridge(const RawScalogram& scal);

inline constexpr double kLogEpsilon = 1e-6;

/// h[joint][axis][scale][time]: log(eps + |W|), z-scored per scale row with
/// population variance; constant rows become 0.
struct Scalogram {
  int joints = 0;
  int axes = skeleton::kAxes;
  int scales = 0;
  int length = 0;
  std::vector<double> h;

  std::size_t index(int j, int a, int i, int t) const noexcept {
    return ((static_cast<std::size_t>(j) * axes + a) * scales + i) * length + t;
  }
  double at(int j, int a, int i, int t) const noexcept { return h[index(j, a, i, t)]; }
};

/// Applies the log-magnitude and per-row z-score to one raw scalogram,
/// writing scales*length values to out.
void normalize_log_magnitude(const RawScalogram& raw, std::span<double> out);

Scalogram build_scalogram(const skeleton::VelocityField& vel, const CwtKernelTable& table);
Scalogram build_scalogram(const skeleton::VelocityField& vel, const ScaleGrid& grid, const MotherWavelet& w);

// WSCL dump: "WSCL", u32 version=1, u32 V, u32 A, u32 F, u32 L, then
// V*A*F*L little-endian float32 in (joint, axis, scale, time) order.
std::string encode_wscl(const Scalogram& s);
Scalogram decode_wscl(std::string_view bytes, std::string_view origin = "<memory>");
void write_wscl(const Scalogram& s, const std::filesystem::path& path);
Scalogram read_wscl(const std::filesystem::path& path);

}  // namespace gaitwave::cwt
