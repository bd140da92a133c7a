#pragma once

// FIR band-pass design, zero-phase filtering, periodogram PSD estimation,
// and sliding-window augmentation. All series math runs in f64.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "miemph/eeg.hpp"

namespace miemph::dsp {

enum class FirWindow { hamming };

struct FirSpec {
  std::size_t order{30};  // even; kernel has order+1 taps
  double f_low_hz{8.0};
  double f_high_hz{30.0};
  double fs_hz{250.0};
  FirWindow window{FirWindow::hamming};

  void validate() const;
};

struct FirKernel {
  std::vector<double> coefficients;  // symmetric about the midpoint

  std::size_t order() const { return coefficients.size() - 1; }
};

// Hamming-windowed sinc band-pass (difference of two sinc low-passes),
// DC-nulled and normalized to unit gain at the band center. The raw
// windowed sinc at order 30 leaks ~0.17 at DC, so both corrections are
// applied; symmetry is exact by construction.
FirKernel design_bandpass_fir(const FirSpec& spec);

// |H(f)| by direct summation of c[n]*e^{-j2*pi*f*n/fs}.
double frequency_response_mag(const FirKernel& kernel, double f_hz,
                              double fs_hz);

// Forward-backward filtering: zero phase, |H|^2 magnitude, output length
// equals input length. Edges are odd-reflected over 3*order samples and
// the padding is stripped before return.
std::vector<double> filtfilt(const FirKernel& kernel,
                             std::span<const double> signal);

struct PsdEstimate {
  std::vector<double> freqs_hz;  // bin centers, starts at 0
  std::vector<double> power;     // one-sided density, >= 0
  double fs_hz{0.0};
  std::size_t n_fft{0};

  double bin_width_hz() const { return fs_hz / static_cast<double>(n_fft); }
};

// Reusable DFT plan for fixed-length periodograms; building one costs
// O(n^2) trig, estimating with it costs two dot products per bin.
class PsdPlan {
 public:
  PsdPlan(std::size_t n, double fs_hz);
  PsdEstimate estimate(std::span<const double> signal) const;

  std::size_t n() const { return n_; }
  double fs_hz() const { return fs_hz_; }

  // Process-wide cache keyed by (n, fs); thread-safe.
  static std::shared_ptr<const PsdPlan> get(std::size_t n, double fs_hz);

 private:
  std::size_t n_;
  double fs_hz_;
  std::size_t n_bins_;
  std::vector<double> cos_table_;  // [n_bins][n]
  std::vector<double> sin_table_;
};

// One-sided periodogram of the unwindowed signal, n_fft = len(signal):
// P(f_k) = |X_k|^2 / (fs * N), doubled for 0 < f_k < fs/2. The plain
// bin sum of P * df recovers the signal mean square exactly (Parseval).
PsdEstimate periodogram(std::span<const double> signal, double fs_hz);

struct BandPower {
  double linear{0.0};
  std::optional<double> db;  // 10*log10(linear); empty when linear == 0
};

// Integral of the density over bins with f1 <= f_k <= f2. Quadrature
// weights are df per included bin (composite trapezoid extended by the
// outer half-bins), so the full band reproduces the bin sum identically.
BandPower band_power(const PsdEstimate& psd, double f1_hz, double f2_hz);

struct WindowSpec {
  double length_s{2.0};
  double overlap_frac{0.5};  // in [0, 1)

  void validate() const;
};

// Equal-length sub-slices at stride length*(1-overlap); count is
// floor((T-W)/S) + 1.
std::vector<Matrix> slide_windows(const eeg::Epoch& epoch,
                                  const WindowSpec& spec);

}  // namespace miemph::dsp
