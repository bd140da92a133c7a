#include "miemph/synth.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "miemph/errors.hpp"
#include "miemph/rng.hpp"

namespace miemph::synth {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Approximate 1/f (about -10 dB/decade in power over the EEG band) as a
// mix of white noise and three one-pole low-passes at octave-ish spacing.
struct PinkShaper {
  double y1{0.0}, y2{0.0}, y3{0.0};

  double step(double white, double fs_hz) {
    const double a1 = std::exp(-kTwoPi * 1.0 / fs_hz);
    const double a2 = std::exp(-kTwoPi * 4.0 / fs_hz);
    const double a3 = std::exp(-kTwoPi * 16.0 / fs_hz);
    y1 = a1 * y1 + (1.0 - a1) * white;
    y2 = a2 * y2 + (1.0 - a2) * white;
    y3 = a3 * y3 + (1.0 - a3) * white;
    return 0.25 * white + 3.4 * y1 + 2.2 * y2 + 1.2 * y3;
  }
};

}  // namespace

void SynthConfig::validate() const {
  if (n_channels == 0) throw ConfigError("synth: n_channels must be >= 1");
  if (!(fs_hz > 0.0) || !(trial_s > 0.0))
    throw ConfigError("synth: fs and trial length must be positive");
  if (!(mi_t0_s >= 0.0) || !(mi_t0_s < mi_t1_s) || mi_t1_s > trial_s)
    throw ConfigError("synth: MI window must satisfy 0 <= t0 < t1 <= trial_s");
  if (trials_per_class == 0)
    throw ConfigError("synth: trials_per_class must be >= 1");
  if (!(noise_amp >= 0.0)) throw ConfigError("synth: negative noise amplitude");
  for (const auto& m : motifs) {
    if (m.class_id < 0 || m.class_id >= eeg::kNumClasses)
      throw ConfigError("synth: motif class out of range");
    if (!(m.freq_hz > 0.0) || m.freq_hz >= fs_hz / 2.0)
      throw ConfigError("synth: motif frequency outside (0, fs/2)");
    if (m.rest_amp < 0.0 || m.mi_amp < 0.0)
      throw ConfigError("synth: negative motif amplitude");
    for (std::size_t c : m.channels)
      if (c >= n_channels) throw ConfigError("synth: motif channel out of range");
  }
}

eeg::TrialSet generate_trialset(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n_samples =
      static_cast<std::size_t>(std::lround(cfg.trial_s * cfg.fs_hz));
  const std::size_t mi_start =
      static_cast<std::size_t>(std::lround(cfg.mi_t0_s * cfg.fs_hz));
  const std::size_t mi_end =
      static_cast<std::size_t>(std::lround(cfg.mi_t1_s * cfg.fs_hz));
  const std::size_t n_trials = cfg.trials_per_class * eeg::kNumClasses;

  eeg::TrialSet set;
  set.fs_hz = cfg.fs_hz;
  set.channels = eeg::ChannelSet::make_default(cfg.n_channels);
  set.trials.reserve(n_trials);

  for (std::size_t ti = 0; ti < n_trials; ++ti) {
    const int label = static_cast<int>(ti % eeg::kNumClasses);
    rng::Xoshiro256pp gen(rng::derive_seed(
        cfg.seed, "trial", (static_cast<std::uint64_t>(cfg.session_id) << 32) | ti));

    eeg::Trial t;
    t.fs_hz = cfg.fs_hz;
    t.label = static_cast<std::uint8_t>(label);
    t.subject_id = cfg.subject_id;
    t.session_id = cfg.session_id;
    t.data = Matrix(cfg.n_channels, n_samples);

    for (std::size_t c = 0; c < cfg.n_channels; ++c) {
      PinkShaper shaper;
      double* row = t.data.row(c);
      for (std::size_t s = 0; s < n_samples; ++s)
        row[s] = cfg.noise_amp * shaper.step(gen.normal(), cfg.fs_hz);
    }

    for (const auto& m : cfg.motifs) {
      if (m.class_id != label) continue;
      const double phase = gen.uniform(0.0, kTwoPi);
      const double freq =
          m.freq_hz + (cfg.freq_jitter_hz > 0.0
                           ? gen.uniform(-cfg.freq_jitter_hz, cfg.freq_jitter_hz)
                           : 0.0);
      for (std::size_t c : m.channels) {
        double* row = t.data.row(c);
        for (std::size_t s = 0; s < n_samples; ++s) {
          const bool mi = s >= mi_start && s < mi_end;
          const double amp = cfg.amp_scale * (mi ? m.mi_amp : m.rest_amp);
          row[s] += amp * std::sin(kTwoPi * freq * static_cast<double>(s) /
                                       cfg.fs_hz +
                                   phase);
        }
      }
    }
    set.trials.push_back(std::move(t));
  }
  return set;
}

SynthConfig default_separable_profile() {
  SynthConfig cfg;
  cfg.n_channels = 8;
  cfg.trials_per_class = 50;
  cfg.noise_amp = 1.0;
  cfg.motifs = {
      {0, {1, 2}, 10.0, 0.5, 1.5},
      {1, {3, 4}, 20.0, 0.5, 1.5},
      {2, {5, 6}, 13.0, 0.5, 1.5},
  };
  return cfg;
}

SynthConfig load_profile_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad profile JSON in " + path.string() + ": " + e.what());
  }
  SynthConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.n_channels = j.value("n_channels", std::size_t{60});
    cfg.fs_hz = j.value("fs_hz", 250.0);
    cfg.trial_s = j.value("trial_s", 10.0);
    if (j.contains("mi_window")) {
      cfg.mi_t0_s = j["mi_window"].at(0).get<double>();
      cfg.mi_t1_s = j["mi_window"].at(1).get<double>();
    }
    cfg.trials_per_class = j.value("trials_per_class", std::size_t{100});
    cfg.noise_amp = j.value("noise_amp", 1.0);
    cfg.session_id = j.value("session_id", 1);
    cfg.subject_id = j.value("subject_id", std::string("sub01"));
    cfg.amp_scale = j.value("amp_scale", 1.0);
    cfg.freq_jitter_hz = j.value("freq_jitter_hz", 0.0);
    for (const auto& jm : j.value("motifs", nlohmann::json::array())) {
      ClassMotif m;
      m.class_id = jm.at("class").get<int>();
      m.channels = jm.at("channels").get<std::vector<std::size_t>>();
      m.freq_hz = jm.at("freq_hz").get<double>();
      m.rest_amp = jm.at("rest_amp").get<double>();
      m.mi_amp = jm.at("mi_amp").get<double>();
      cfg.motifs.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad profile JSON in " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_profile_json(const SynthConfig& cfg,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["n_channels"] = cfg.n_channels;
  j["fs_hz"] = cfg.fs_hz;
  j["trial_s"] = cfg.trial_s;
  j["mi_window"] = {cfg.mi_t0_s, cfg.mi_t1_s};
  j["trials_per_class"] = cfg.trials_per_class;
  j["noise_amp"] = cfg.noise_amp;
  j["session_id"] = cfg.session_id;
  j["subject_id"] = cfg.subject_id;
  j["amp_scale"] = cfg.amp_scale;
  j["freq_jitter_hz"] = cfg.freq_jitter_hz;
  j["motifs"] = nlohmann::ordered_json::array();
  for (const auto& m : cfg.motifs) {
    nlohmann::ordered_json jm;
    jm["class"] = m.class_id;
    jm["channels"] = m.channels;
    jm["freq_hz"] = m.freq_hz;
    jm["rest_amp"] = m.rest_amp;
    jm["mi_amp"] = m.mi_amp;
    j["motifs"].push_back(std::move(jm));
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace miemph::synth
