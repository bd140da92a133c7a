#pragma once

// Per-channel PSD emphasis: band power of each channel's MI epoch becomes
// a scale factor applied to that channel's time series.

#include <string>
#include <vector>

#include "miemph/dsp.hpp"
#include "miemph/eeg.hpp"

namespace miemph::emphasis {

enum class Mode {
  linear_mean_norm,  // linear band powers / their cross-channel mean
  db_raw,            // 10*log10(band power), verbatim
  minmax,            // linear band powers affinely mapped to [0, 1]
};

Mode mode_from_string(const std::string& s);
std::string mode_to_string(Mode m);

struct EmphasisConfig {
  double f1_hz{8.0};
  double f2_hz{30.0};
  Mode mode{Mode::linear_mean_norm};

  void validate() const;
};

struct EmphasisWeights {
  std::vector<double> weights;  // one per channel
  Mode mode{Mode::linear_mean_norm};
};

// Per-channel band power over [f1, f2] of the epoch, transformed per mode.
// Weights are computed per trial from that trial's own epoch only.
EmphasisWeights compute_weights(const eeg::Epoch& epoch,
                                const EmphasisConfig& cfg);

// Pre-normalization linear band powers, exposed for ranking/diagnostics.
std::vector<double> channel_band_powers(const eeg::Epoch& epoch,
                                        const EmphasisConfig& cfg);

// Row c of the output is w[c] times row c of the input.
Matrix apply_emphasis(const Matrix& window, const EmphasisWeights& w);

}  // namespace miemph::emphasis
