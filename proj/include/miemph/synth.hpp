#pragma once

// Deterministic synthetic EEG: 1/f-shaped background noise on every
// channel plus class-dependent sinusoidal motifs whose amplitude steps up
// (or down) inside the MI window. Generation is fully specified by the
// seed — splitmix64-derived xoshiro256++ streams, one per trial — so the
// same config yields byte-identical files on any platform.

#include <filesystem>
#include <vector>

#include "miemph/eeg.hpp"

namespace miemph::synth {

struct ClassMotif {
  int class_id{0};
  std::vector<std::size_t> channels;
  double freq_hz{10.0};
  double rest_amp{0.0};  // amplitude outside the MI window
  double mi_amp{0.0};    // amplitude inside the MI window

  bool amplifies() const { return mi_amp > rest_amp; }
};

struct SynthConfig {
  std::uint64_t seed{0};
  std::size_t n_channels{60};
  double fs_hz{250.0};
  double trial_s{10.0};
  double mi_t0_s{6.0};
  double mi_t1_s{10.0};
  std::size_t trials_per_class{100};
  double noise_amp{1.0};  // RMS scale of the 1/f background
  int session_id{1};
  std::string subject_id{"sub01"};
  // Session-to-session non-stationarity knobs: motif amplitudes are
  // multiplied by amp_scale and frequencies jittered uniformly within
  // +/- freq_jitter_hz per trial.
  double amp_scale{1.0};
  double freq_jitter_hz{0.0};
  std::vector<ClassMotif> motifs;

  void validate() const;
};

// Balanced, seed-determined trial set; labels cycle 0,1,2,...
eeg::TrialSet generate_trialset(const SynthConfig& cfg);

// Three classes on disjoint channel subsets at 10, 20 and 13 Hz, sized so
// the band-power contrast is separable at desk scale.
SynthConfig default_separable_profile();

// JSON profile files (schema documented in the README).
SynthConfig load_profile_json(const std::filesystem::path& path);
void save_profile_json(const SynthConfig& cfg,
                       const std::filesystem::path& path);

}  // namespace miemph::synth
