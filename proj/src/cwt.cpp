#include "gaitwave/cwt.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "gaitwave/error.hpp"
#include "gaitwave/io.hpp"

namespace gaitwave::cwt {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::string_view code(WaveletKind kind) {
  switch (kind) {
    case WaveletKind::Morlet: return "morl";
    case WaveletKind::MexicanHat: return "mexh";
    case WaveletKind::Gaussian1: return "gaus1";
    case WaveletKind::Shannon: return "shan";
    case WaveletKind::ComplexMorlet: return "cmor";
  }
  return "morl";
}

WaveletKind parse_wavelet(std::string_view c) {
  if (c == "morl") return WaveletKind::Morlet;
  if (c == "mexh") return WaveletKind::MexicanHat;
  if (c == "gaus1") return WaveletKind::Gaussian1;
  if (c == "shan") return WaveletKind::Shannon;
  if (c == "cmor") return WaveletKind::ComplexMorlet;
  fail(ErrorKind::InvalidConfig, "unknown wavelet '" + std::string(c) + "' (expected morl|mexh|gaus1|shan|cmor)");
}

bool MotherWavelet::complex_valued() const noexcept {
  return kind == WaveletKind::Shannon || kind == WaveletKind::ComplexMorlet;
}

double MotherWavelet::effective_support() const noexcept {
  switch (kind) {
    case WaveletKind::Morlet:
    case WaveletKind::ComplexMorlet:
    case WaveletKind::MexicanHat:
    case WaveletKind::Gaussian1:
      return 8.0;
    case WaveletKind::Shannon:
      // Tail mass beyond T is bounded by 2 / (pi^2 b T).
      return 2.0e8 / (kPi * kPi * bandwidth) * 1.01;
  }
  return 8.0;
}

double MotherWavelet::unit_period() const noexcept {
  switch (kind) {
    case WaveletKind::Morlet:
    case WaveletKind::ComplexMorlet:
      return 2.0 * kPi / omega0;
    case WaveletKind::MexicanHat:
    case WaveletKind::Gaussian1:
      return 2.0 * kPi / std::numbers::sqrt2;
    case WaveletKind::Shannon:
      return 1.0 / center;
  }
  return 1.0;
}

Complex eval_wavelet(const MotherWavelet& w, double t) {
  if (std::abs(t) > w.effective_support()) return {0.0, 0.0};
  switch (w.kind) {
    case WaveletKind::Morlet: {
      const double c = std::pow(kPi, -0.25) * std::sqrt(2.0 / (1.0 + std::exp(-w.omega0 * w.omega0)));
      return {c * std::cos(w.omega0 * t) * std::exp(-0.5 * t * t), 0.0};
    }
    case WaveletKind::ComplexMorlet: {
      const double env = std::pow(kPi, -0.25) * std::exp(-0.5 * t * t);
      return {env * std::cos(w.omega0 * t), env * std::sin(w.omega0 * t)};
    }
    case WaveletKind::MexicanHat: {
      const double c = 2.0 / (std::sqrt(3.0) * std::pow(kPi, 0.25));
      return {c * (1.0 - t * t) * std::exp(-0.5 * t * t), 0.0};
    }
    case WaveletKind::Gaussian1: {
      const double c = std::pow(2.0 / kPi, 0.25);
      return {c * (-2.0 * t) * std::exp(-t * t), 0.0};
    }
    case WaveletKind::Shannon: {
      const double env = std::sqrt(w.bandwidth) * sinc(w.bandwidth * t);
      const double ph = 2.0 * kPi * w.center * t;
      return {env * std::cos(ph), env * std::sin(ph)};
    }
  }
  return {0.0, 0.0};
}

int ScaleGrid::nearest_index(double p) const {
  int best = 0;
  double best_d = std::abs(std::log(period(0) / p));
  for (int i = 1; i < size(); ++i) {
    const double d = std::abs(std::log(period(i) / p));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

ScaleGrid make_scale_grid(int num_scales, double period_min, double period_max, const MotherWavelet& w) {
  if (num_scales < 2) fail(ErrorKind::InvalidRange, "scale grid needs at least 2 scales");
  if (!(period_min >= 2.0) || !(period_min < period_max))
    fail(ErrorKind::InvalidRange, "scale grid requires 2 <= period_min < period_max");
  ScaleGrid g;
  g.unit_period = w.unit_period();
  const double s0 = period_min / g.unit_period;
  const double s1 = period_max / g.unit_period;
  g.scales.resize(num_scales);
  const double log_s0 = std::log(s0);
  const double step = (std::log(s1) - log_s0) / (num_scales - 1);
  for (int i = 0; i < num_scales; ++i) g.scales[i] = std::exp(log_s0 + step * i);
  g.scales.front() = s0;
  g.scales.back() = s1;
  return g;
}

RawScalogram cwt_direct(std::span<const double> v, const ScaleGrid& grid, const MotherWavelet& w) {
  const int L = static_cast<int>(v.size());
  RawScalogram out{grid.size(), L, std::vector<Complex>(static_cast<std::size_t>(grid.size()) * L)};
  const double support = w.effective_support();
  for (int i = 0; i < grid.size(); ++i) {
    const double s = grid.scales[i];
    const double norm = 1.0 / std::sqrt(s);
    const double reach = std::min(support * s, static_cast<double>(L));
    for (int tau = 0; tau < L; ++tau) {
      const int t0 = std::max(0, tau - static_cast<int>(std::floor(reach)));
      const int t1 = std::min(L - 1, tau + static_cast<int>(std::floor(reach)));
      Complex acc{0.0, 0.0};
      for (int t = t0; t <= t1; ++t) acc += v[t] * std::conj(eval_wavelet(w, (t - tau) / s));
      out.coef[static_cast<std::size_t>(i) * L + tau] = acc * norm;
    }
  }
  return out;
}

struct CwtKernelTable::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

CwtKernelTable::CwtKernelTable(const ScaleGrid& grid, const MotherWavelet& w, int length)
    : grid_(grid), wavelet_(w), length_(length), plans_(std::make_unique<Plans>()) {
  if (length < 1) fail(ErrorKind::InvalidRange, "CWT signal length must be >= 1");
  fft_size_ = 1;
  while (fft_size_ < 2 * length - 1) fft_size_ *= 2;
  const int N = fft_size_;
  const int F = grid.size();
  kernels_.assign(static_cast<std::size_t>(F) * N, Complex{0.0, 0.0});

  std::vector<Complex> scratch(N);
  {
    std::lock_guard lock(planner_mutex());
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    plans_->forward = fftw_plan_dft_1d(N, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_->inverse = fftw_plan_dft_1d(N, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }

  const double support = w.effective_support();
  for (int i = 0; i < F; ++i) {
    const double s = grid.scales[i];
    const double norm = 1.0 / std::sqrt(s);
    const double reach = std::min(support * s, static_cast<double>(length));
    const int r = std::min(length - 1, static_cast<int>(std::floor(reach)));
    std::fill(scratch.begin(), scratch.end(), Complex{0.0, 0.0});
    // g[m] = h[-m] with h[k] = conj(psi(k/s)) / sqrt(s); stored circularly.
    for (int m = -r; m <= r; ++m) scratch[(m + N) % N] = norm * std::conj(eval_wavelet(w, -m / s));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_execute_dft(plans_->forward, buf, buf);
    std::copy(scratch.begin(), scratch.end(), kernels_.begin() + static_cast<std::ptrdiff_t>(i) * N);
  }
}

CwtKernelTable::~CwtKernelTable() {
  std::lock_guard lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->inverse) fftw_destroy_plan(plans_->inverse);
}

RawScalogram CwtKernelTable::transform(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != length_)
    fail(ErrorKind::ShapeMismatch, "signal length " + std::to_string(v.size()) + " does not match kernel table length " +
                                       std::to_string(length_));
  const int N = fft_size_;
  const int L = length_;
  const int F = scales();
  std::vector<Complex> spectrum(N, Complex{0.0, 0.0});
  for (int t = 0; t < L; ++t) spectrum[t] = v[t];
  fftw_execute_dft(plans_->forward, reinterpret_cast<fftw_complex*>(spectrum.data()),
                   reinterpret_cast<fftw_complex*>(spectrum.data()));

  RawScalogram out{F, L, std::vector<Complex>(static_cast<std::size_t>(F) * L)};
  std::vector<Complex> work(N);
  const double inv_n = 1.0 / N;
  for (int i = 0; i < F; ++i) {
    const Complex* k = kernels_.data() + static_cast<std::size_t>(i) * N;
    for (int f = 0; f < N; ++f) work[f] = spectrum[f] * k[f];
    fftw_execute_dft(plans_->inverse, reinterpret_cast<fftw_complex*>(work.data()),
                     reinterpret_cast<fftw_complex*>(work.data()));
    for (int tau = 0; tau < L; ++tau) out.coef[static_cast<std::size_t>(i) * L + tau] = work[tau] * inv_n;
  }
  return out;
}

RawScalogram cwt_fast(std::span<const double> v, const ScaleGrid& grid, const MotherWavelet& w) {
  if (v.empty()) fail(ErrorKind::InvalidRange, "CWT signal length must be >= 1");
  CwtKernelTable table(grid, w, static_cast<int>(v.size()));
  return table.transform(v);
}

int find_ridge(const RawScalogram& scal) {
  if (scal.scales < 1 || scal.length < 1) fail(ErrorKind::InvalidRange, "empty scalogram");
  int best = 0;
  double best_mean = -1.0;
  for (int i = 0; i < scal.scales; ++i) {
    double sum = 0.0;
    for (int tau = 0; tau < scal.length; ++tau) sum += scal.magnitude(i, tau);
    const double mean = sum / scal.length;
    if (mean > best_mean) {
      best_mean = mean;
      best = i;
    }
  }
  return best;
}

void normalize_log_magnitude(const RawScalogram& raw, std::span<double> out) {
  const int L = raw.length;
  for (int i = 0; i < raw.scales; ++i) {
    double* row = out.data() + static_cast<std::size_t>(i) * L;
    double mean = 0.0;
    for (int t = 0; t < L; ++t) {
      row[t] = std::log(kLogEpsilon + raw.magnitude(i, t));
      mean += row[t];
    }
    mean /= L;
    double var = 0.0;
    for (int t = 0; t < L; ++t) var += (row[t] - mean) * (row[t] - mean);
    const double sd = std::sqrt(var / L);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      std::fill(row, row + L, 0.0);
      continue;
    }
    for (int t = 0; t < L; ++t) row[t] = (row[t] - mean) / sd;
  }
}

Scalogram build_scalogram(const skeleton::VelocityField& vel, const CwtKernelTable& table) {
  if (vel.frames != table.length())
    fail(ErrorKind::ShapeMismatch, "velocity length " + std::to_string(vel.frames) + " does not match CWT table length " +
                                       std::to_string(table.length()));
  Scalogram s;
  s.joints = vel.joints;
  s.scales = table.scales();
  s.length = vel.frames;
  s.h.resize(static_cast<std::size_t>(s.joints) * s.axes * s.scales * s.length);
  for (int j = 0; j < s.joints; ++j)
    for (int a = 0; a < s.axes; ++a) {
      const auto raw = table.transform(vel.signal(a, j));
      normalize_log_magnitude(raw, std::span<double>(s.h.data() + s.index(j, a, 0, 0),
                                                     static_cast<std::size_t>(s.scales) * s.length));
    }
  return s;
}

Scalogram build_scalogram(const skeleton::VelocityField& vel, const ScaleGrid& grid, const MotherWavelet& w) {
  CwtKernelTable table(grid, w, vel.frames);
  return build_scalogram(vel, table);
}

std::string encode_wscl(const Scalogram& s) {
  io::ByteWriter w;
  w.bytes("WSCL");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(s.joints));
  w.u32(static_cast<std::uint32_t>(s.axes));
  w.u32(static_cast<std::uint32_t>(s.scales));
  w.u32(static_cast<std::uint32_t>(s.length));
  for (double v : s.h) w.f32(static_cast<float>(v));
  return w.str();
}

Scalogram decode_wscl(std::string_view bytes, std::string_view origin) {
  io::ByteReader r(bytes, std::string(origin));
  if (r.bytes(4) != "WSCL") fail(ErrorKind::MalformedFile, std::string(origin) + ": bad WSCL magic");
  if (r.u32() != 1) fail(ErrorKind::MalformedFile, std::string(origin) + ": unsupported WSCL version");
  Scalogram s;
  s.joints = static_cast<int>(r.u32());
  s.axes = static_cast<int>(r.u32());
  s.scales = static_cast<int>(r.u32());
  s.length = static_cast<int>(r.u32());
  if (s.axes != skeleton::kAxes) fail(ErrorKind::MalformedFile, std::string(origin) + ": WSCL axis count must be 2");
  s.h.resize(static_cast<std::size_t>(s.joints) * s.axes * s.scales * s.length);
  for (double& v : s.h) v = r.f32();
  if (!r.done()) fail(ErrorKind::MalformedFile, std::string(origin) + ": trailing bytes after WSCL payload");
  return s;
}

void write_wscl(const Scalogram& s, const std::filesystem::path& path) { io::write_file_atomic(path, encode_wscl(s)); }

Scalogram read_wscl(const std::filesystem::path& path) { return decode_wscl(io::read_file(path), path.string()); }

}  // namespace gaitwave::cwt
