#include "miemph/emphasis.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "miemph/errors.hpp"
#include "miemph/kernels.hpp"

namespace miemph::emphasis {

Mode mode_from_string(const std::string& s) {
  if (s == "linear-mean-norm") return Mode::linear_mean_norm;
  if (s == "db-raw") return Mode::db_raw;
  if (s == "minmax") return Mode::minmax;
  throw ConfigError("unknown emphasis mode '" + s + "'");
}

std::string mode_to_string(Mode m) {
  switch (m) {
    case Mode::linear_mean_norm:
      return "linear-mean-norm";
    case Mode::db_raw:
      return "db-raw";
    case Mode::minmax:
      return "minmax";
  }
  return "?";
}

void EmphasisConfig::validate() const {
  if (!(f1_hz >= 0.0) || !(f1_hz < f2_hz))
    throw ConfigError("emphasis band must satisfy 0 <= f1 < f2");
}

std::vector<double> channel_band_powers(const eeg::Epoch& epoch,
                                        const EmphasisConfig& cfg) {
  cfg.validate();
  if (epoch.data.cols < 2)
    throw DataError("epoch too short for PSD (need >= 2 samples)");
  const auto plan = dsp::PsdPlan::get(epoch.data.cols, epoch.fs_hz);
  std::vector<double> powers(epoch.data.rows);
  for (std::size_t c = 0; c < epoch.data.rows; ++c) {
    const auto psd = plan->estimate(
        std::span<const double>(epoch.data.row(c), epoch.data.cols));
    powers[c] = dsp::band_power(psd, cfg.f1_hz, cfg.f2_hz).linear;
  }
  return powers;
}

EmphasisWeights compute_weights(const eeg::Epoch& epoch,
                                const EmphasisConfig& cfg) {
  std::vector<double> p = channel_band_powers(epoch, cfg);
  EmphasisWeights w;
  w.mode = cfg.mode;
  switch (cfg.mode) {
    case Mode::db_raw: {
      w.weights.resize(p.size());
      for (std::size_t c = 0; c < p.size(); ++c) {
        if (!(p[c] > 0.0))
          throw DataError("channel " + std::to_string(c) +
                          ": zero band power, dB weight undefined");
        w.weights[c] = 10.0 * std::log10(p[c]);
      }
      break;
    }
    case Mode::linear_mean_norm: {
      double mean = 0.0;
      for (double v : p) mean += v;
      mean /= static_cast<double>(p.size());
      if (!(mean > 0.0))
        throw DataError("all channels silent: mean band power is zero");
      w.weights.resize(p.size());
      for (std::size_t c = 0; c < p.size(); ++c) w.weights[c] = p[c] / mean;
      break;
    }
    case Mode::minmax: {
      const auto [lo_it, hi_it] = std::minmax_element(p.begin(), p.end());
      const double lo = *lo_it, hi = *hi_it;
      w.weights.resize(p.size());
      if (hi > lo) {
        for (std::size_t c = 0; c < p.size(); ++c)
          w.weights[c] = (p[c] - lo) / (hi - lo);
      } else {
        // constant powers: the affine map is degenerate, use the midpoint
        std::fill(w.weights.begin(), w.weights.end(), 0.5);
      }
      break;
    }
  }
  return w;
}

Matrix apply_emphasis(const Matrix& window, const EmphasisWeights& w) {
  if (window.rows != w.weights.size())
    throw DataError("emphasis dimension mismatch: " +
                    std::to_string(window.rows) + " rows vs " +
                    std::to_string(w.weights.size()) + " weights");
  Matrix out = window;
  const auto& k = kernels::ops<double>();
  for (std::size_t c = 0; c < out.rows; ++c)
    k.scale(w.weights[c], out.row(c), out.cols);
  return out;
}

}  // namespace miemph::emphasis
