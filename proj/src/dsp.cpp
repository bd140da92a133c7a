#include "miemph/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "miemph/errors.hpp"
#include "miemph/kernels.hpp"

namespace miemph::dsp {
namespace {

constexpr double kPi = 3.14159265358979323846;

double sinc_lowpass(double fc_hz, double fs_hz, long m) {
  if (m == 0) return 2.0 * fc_hz / fs_hz;
  const double x = static_cast<double>(m);
  return std::sin(2.0 * kPi * fc_hz * x / fs_hz) / (kPi * x);
}

// Causal FIR pass, y[n] = sum_k c[k] x[n-k], zero initial state. Written
// as a valid convolution with reversed taps over a front-padded copy.
void fir_forward(const std::vector<double>& c_rev, std::span<const double> x,
                 std::vector<double>& scratch, std::vector<double>& y) {
  const std::size_t taps = c_rev.size();
  scratch.assign(x.size() + taps - 1, 0.0);
  std::copy(x.begin(), x.end(), scratch.begin() + taps - 1);
  y.assign(x.size(), 0.0);
  const auto& k = kernels::ops<double>();
  k.conv1d_acc(scratch.data(), 0, 1, c_rev.data(), 0, taps, y.data(), y.size());
}

}  // namespace

void FirSpec::validate() const {
  if (order == 0 || order % 2 != 0)
    throw ConfigError("FIR order must be a positive even integer");
  if (!(f_low_hz > 0.0) || !(f_low_hz < f_high_hz) ||
      !(f_high_hz < fs_hz / 2.0))
    throw ConfigError("band edges must satisfy 0 < f_low < f_high < fs/2");
}

FirKernel design_bandpass_fir(const FirSpec& spec) {
  spec.validate();
  const std::size_t n = spec.order + 1;
  const long mid = static_cast<long>(spec.order) / 2;
  std::vector<double> c(n, 0.0);

  // Compute one half and mirror so c[i] == c[order-i] holds bit-exactly.
  for (std::size_t i = 0; i <= static_cast<std::size_t>(mid); ++i) {
    const long m = static_cast<long>(i) - mid;
    const double ideal = sinc_lowpass(spec.f_high_hz, spec.fs_hz, m) -
                         sinc_lowpass(spec.f_low_hz, spec.fs_hz, m);
    const double w =
        0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                               static_cast<double>(spec.order));
    c[i] = ideal * w;
    c[spec.order - i] = c[i];
  }

  double mean = 0.0;
  for (double v : c) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : c) v -= mean;

  FirKernel kernel{std::move(c)};
  const double center = 0.5 * (spec.f_low_hz + spec.f_high_hz);
  const double gain = frequency_response_mag(kernel, center, spec.fs_hz);
  if (!(gain > 0.0)) throw ConfigError("degenerate band: zero center gain");
  for (double& v : kernel.coefficients) v /= gain;
  return kernel;
}

double frequency_response_mag(const FirKernel& kernel, double f_hz,
                              double fs_hz) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < kernel.coefficients.size(); ++i) {
    const double ang = -2.0 * kPi * f_hz * static_cast<double>(i) / fs_hz;
    re += kernel.coefficients[i] * std::cos(ang);
    im += kernel.coefficients[i] * std::sin(ang);
  }
  return std::sqrt(re * re + im * im);
}

std::vector<double> filtfilt(const FirKernel& kernel,
                             std::span<const double> signal) {
  const std::size_t order = kernel.order();
  const std::size_t taps = order + 1;
  const std::size_t pad = 3 * order;
  if (signal.size() <= 3 * taps)
    throw DataError("signal too short for filtfilt: need > " +
                    std::to_string(3 * taps) + " samples, got " +
                    std::to_string(signal.size()));

  // Odd reflection about the end points.
  std::vector<double> z;
  z.reserve(signal.size() + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i)
    z.push_back(2.0 * signal.front() - signal[pad - i]);
  z.insert(z.end(), signal.begin(), signal.end());
  for (std::size_t i = 0; i < pad; ++i)
    z.push_back(2.0 * signal.back() - signal[signal.size() - 2 - i]);

  std::vector<double> c_rev(kernel.coefficients.rbegin(),
                            kernel.coefficients.rend());
  std::vector<double> scratch, fwd, bwd;
  fir_forward(c_rev, z, scratch, fwd);
  std::reverse(fwd.begin(), fwd.end());
  fir_forward(c_rev, fwd, scratch, bwd);
  std::reverse(bwd.begin(), bwd.end());

  return std::vector<double>(bwd.begin() + static_cast<std::ptrdiff_t>(pad),
                             bwd.begin() + static_cast<std::ptrdiff_t>(pad + signal.size()));
}

PsdPlan::PsdPlan(std::size_t n, double fs_hz) : n_(n), fs_hz_(fs_hz) {
  if (n < 2) throw DataError("periodogram needs at least 2 samples");
  if (!(fs_hz > 0.0)) throw ConfigError("sampling rate must be positive");
  n_bins_ = n / 2 + 1;
  cos_table_.resize(n_bins_ * n);
  sin_table_.resize(n_bins_ * n);
  for (std::size_t k = 0; k < n_bins_; ++k) {
    double* cr = cos_table_.data() + k * n;
    double* sr = sin_table_.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * kPi * static_cast<double>(k) *
                         static_cast<double>(i) / static_cast<double>(n);
      cr[i] = std::cos(ang);
      sr[i] = std::sin(ang);
    }
  }
}

PsdEstimate PsdPlan::estimate(std::span<const double> signal) const {
  if (signal.size() != n_)
    throw DataError("signal length does not match PSD plan");
  PsdEstimate psd;
  psd.fs_hz = fs_hz_;
  psd.n_fft = n_;
  psd.freqs_hz.resize(n_bins_);
  psd.power.resize(n_bins_);
  const auto& k = kernels::ops<double>();
  const double norm = 1.0 / (fs_hz_ * static_cast<double>(n_));
  const bool even = (n_ % 2 == 0);
  for (std::size_t b = 0; b < n_bins_; ++b) {
    const double re = k.dot(cos_table_.data() + b * n_, signal.data(), n_);
    const double im = k.dot(sin_table_.data() + b * n_, signal.data(), n_);
    double p = (re * re + im * im) * norm;
    const bool nyquist = even && b == n_bins_ - 1;
    if (b != 0 && !nyquist) p *= 2.0;
    psd.power[b] = p;
    psd.freqs_hz[b] =
        fs_hz_ * static_cast<double>(b) / static_cast<double>(n_);
  }
  return psd;
}

std::shared_ptr<const PsdPlan> PsdPlan::get(std::size_t n, double fs_hz) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, double>, std::shared_ptr<const PsdPlan>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, fs_hz}];
  if (!slot) slot = std::make_shared<PsdPlan>(n, fs_hz);
  return slot;
}

PsdEstimate periodogram(std::span<const double> signal, double fs_hz) {
  return PsdPlan::get(signal.size(), fs_hz)->estimate(signal);
}

BandPower band_power(const PsdEstimate& psd, double f1_hz, double f2_hz) {
  if (!(f1_hz >= 0.0) || !(f1_hz < f2_hz) ||
      f2_hz > psd.fs_hz / 2.0 + 1e-12)
    throw ConfigError("band edges must satisfy 0 <= f1 < f2 <= fs/2");
  const double df = psd.bin_width_hz();
  double linear = 0.0;
  std::size_t hits = 0;
  for (std::size_t b = 0; b < psd.freqs_hz.size(); ++b) {
    const double f = psd.freqs_hz[b];
    if (f >= f1_hz - 1e-12 && f <= f2_hz + 1e-12) {
      linear += psd.power[b] * df;
      ++hits;
    }
  }
  if (hits == 0)
    throw DataError("empty band: no PSD bins inside [" +
                    std::to_string(f1_hz) + ", " + std::to_string(f2_hz) +
                    "] Hz");
  BandPower bp;
  bp.linear = linear;
  if (linear > 0.0) bp.db = 10.0 * std::log10(linear);
  return bp;
}

void WindowSpec::validate() const {
  if (!(length_s > 0.0)) throw ConfigError("window length must be positive");
  if (!(overlap_frac >= 0.0) || !(overlap_frac < 1.0))
    throw ConfigError("overlap fraction must be in [0, 1)");
}

std::vector<Matrix> slide_windows(const eeg::Epoch& epoch,
                                  const WindowSpec& spec) {
  spec.validate();
  const std::size_t total = epoch.data.cols;
  const std::size_t win =
      static_cast<std::size_t>(std::lround(spec.length_s * epoch.fs_hz));
  const std::size_t stride = static_cast<std::size_t>(std::lround(
      static_cast<double>(win) * (1.0 - spec.overlap_frac)));
  if (win == 0 || stride == 0) throw ConfigError("degenerate window spec");
  if (total < win)
    throw DataError("epoch shorter than window (" + std::to_string(total) +
                    " < " + std::to_string(win) + " samples)");

  const std::size_t count = (total - win) / stride + 1;
  std::vector<Matrix> out;
  out.reserve(count);
  for (std::size_t wi = 0; wi < count; ++wi) {
    const std::size_t off = wi * stride;
    Matrix m(epoch.data.rows, win);
    for (std::size_t c = 0; c < epoch.data.rows; ++c)
      std::copy_n(epoch.data.row(c) + off, win, m.row(c));
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace miemph::dsp
