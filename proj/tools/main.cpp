// miemph: synthesize, import, decode and report motor-imagery EEG.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "miemph/eeg.hpp"
#include "miemph/emphasis.hpp"
#include "miemph/errors.hpp"
#include "miemph/eval.hpp"
#include "miemph/kernels.hpp"
#include "miemph/manifest.hpp"
#include "miemph/net.hpp"
#include "miemph/synth.hpp"

namespace fs = std::filesystem;
using namespace miemph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

eeg::Format format_from_path(const fs::path& p, const std::string& override_) {
  if (override_ == "csv") return eeg::Format::csv;
  if (override_ == "binary") return eeg::Format::binary;
  if (!override_.empty()) throw ConfigError("unknown format '" + override_ + "'");
  return p.extension() == ".csv" ? eeg::Format::csv : eeg::Format::binary;
}

struct SynthArgs {
  std::string profile{"separable"};
  std::string profile_file;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> channels;
  std::optional<std::size_t> trials_per_class;
  std::optional<int> session;
  std::optional<std::string> subject;
  std::optional<double> noise_amp;
  std::optional<double> amp_scale;
  std::optional<double> freq_jitter;
  std::string save_profile;
};

int cmd_synth(const SynthArgs& a) {
  synth::SynthConfig cfg;
  if (!a.profile_file.empty())
    cfg = synth::load_profile_json(a.profile_file);
  else if (a.profile == "separable")
    cfg = synth::default_separable_profile();
  else if (a.profile == "default")
    cfg = synth::SynthConfig{};
  else
    throw ConfigError("unknown profile '" + a.profile +
                      "' (use separable, default, or --profile-file)");

  if (a.seed) cfg.seed = *a.seed;
  if (a.channels) cfg.n_channels = *a.channels;
  if (a.trials_per_class) cfg.trials_per_class = *a.trials_per_class;
  if (a.session) cfg.session_id = *a.session;
  if (a.subject) cfg.subject_id = *a.subject;
  if (a.noise_amp) cfg.noise_amp = *a.noise_amp;
  if (a.amp_scale) cfg.amp_scale = *a.amp_scale;
  if (a.freq_jitter) cfg.freq_jitter_hz = *a.freq_jitter;

  const auto set = synth::generate_trialset(cfg);
  eeg::save_trialset(set, a.out, eeg::Format::binary);
  if (!a.save_profile.empty()) synth::save_profile_json(cfg, a.save_profile);

  manifest::Manifest man("synth");
  man.set_seed(cfg.seed);
  auto& j = man.config();
  j["profile"] = a.profile_file.empty() ? a.profile : a.profile_file;
  j["n_channels"] = cfg.n_channels;
  j["fs_hz"] = cfg.fs_hz;
  j["trials_per_class"] = cfg.trials_per_class;
  j["session_id"] = cfg.session_id;
  j["subject_id"] = cfg.subject_id;
  j["noise_amp"] = cfg.noise_amp;
  j["amp_scale"] = cfg.amp_scale;
  j["freq_jitter_hz"] = cfg.freq_jitter_hz;
  man.add_output(a.out);
  man.write(a.out.string() + ".manifest.json");

  std::cout << "wrote " << a.out.string() << " (" << set.size() << " trials, "
            << set.channels.count << " channels @ " << set.fs_hz << " Hz)\n";
  return kExitOk;
}

struct ImportArgs {
  fs::path in, out;
  std::string in_format, out_format;
  double fs_hint{0.0};
};

int cmd_import(const ImportArgs& a) {
  const auto set =
      eeg::load_trialset(a.in, format_from_path(a.in, a.in_format), a.fs_hint);
  eeg::save_trialset(set, a.out, format_from_path(a.out, a.out_format));
  manifest::Manifest man("import");
  man.add_input(a.in);
  man.add_output(a.out);
  man.write(a.out.string() + ".manifest.json");
  std::cout << "imported " << set.size() << " trials -> " << a.out.string()
            << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string mode{"intra"};
  fs::path train_path, val_path;
  std::string cv_source{"validation"};
  fs::path out_dir{"."};
  double f_low{8.0}, f_high{30.0};
  std::size_t filter_order{30};
  std::string filter_scope{"trial"};
  double mi_t0{6.0}, mi_t1{10.0};
  double window_s{2.0};
  double overlap{0.5};
  std::string emphasis_mode{"linear-mean-norm"};
  double emphasis_f1{8.0}, emphasis_f2{30.0};
  std::size_t epochs{100};
  std::size_t batch{32};
  double lr{1e-3};
  double dropout{0.5};
  std::string precision{"f32"};
  std::size_t folds{5};
  std::size_t threads{0};
  std::uint64_t seed{0};
  bool dump_weights{false};
};

eval::EvalConfig make_eval_config(const RunArgs& a) {
  eval::EvalConfig cfg;
  cfg.preprocess.f_low_hz = a.f_low;
  cfg.preprocess.f_high_hz = a.f_high;
  cfg.preprocess.filter_order = a.filter_order;
  if (a.filter_scope == "trial")
    cfg.preprocess.filter_scope = eval::PreprocessConfig::FilterScope::trial;
  else if (a.filter_scope == "epoch")
    cfg.preprocess.filter_scope = eval::PreprocessConfig::FilterScope::epoch;
  else
    throw ConfigError("unknown filter scope '" + a.filter_scope + "'");
  cfg.preprocess.mi_t0_s = a.mi_t0;
  cfg.preprocess.mi_t1_s = a.mi_t1;
  cfg.preprocess.window = {a.window_s, a.overlap};
  cfg.preprocess.emphasis.f1_hz = a.emphasis_f1;
  cfg.preprocess.emphasis.f2_hz = a.emphasis_f2;
  cfg.preprocess.emphasis.mode = emphasis::mode_from_string(a.emphasis_mode);
  cfg.train.epochs = a.epochs;
  cfg.train.batch_size = a.batch;
  cfg.train.learning_rate = a.lr;
  cfg.train.dropout_p = a.dropout;
  cfg.train.threads = a.threads;
  cfg.train.precision =
      a.precision == "f64" ? net::Precision::f64 : net::Precision::f32;
  cfg.n_folds = a.folds;
  cfg.seed = a.seed;
  cfg.train.seed = a.seed;
  return cfg;
}

void dump_weights_csv(const eeg::TrialSet& set,
                      const eval::PreprocessConfig& pcfg, const fs::path& path,
                      std::size_t threads) {
  const auto trials = eval::preprocess(set, pcfg, threads);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "subject,trial,channel,weight\n";
  char buf[128];
  for (std::size_t i = 0; i < trials.size(); ++i)
    for (std::size_t c = 0; c < trials[i].weights.weights.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.9g\n",
                    set.trials[i].subject_id.c_str(), i, c,
                    trials[i].weights.weights[c]);
      f << buf;
    }
}

template <typename T>
int run_with_precision(const RunArgs& a, const eval::EvalConfig& cfg,
                       manifest::Manifest& man) {
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);

  eval::Report report;
  std::vector<net::TrainResult<T>> runs;
  eeg::TrialSet weights_source;

  if (a.mode == "intra") {
    eeg::TrialSet set;
    if (a.cv_source == "validation") {
      set = eeg::load_trialset(a.val_path, eeg::Format::binary);
      man.add_input(a.val_path);
    } else if (a.cv_source == "training") {
      set = eeg::load_trialset(a.train_path, eeg::Format::binary);
      man.add_input(a.train_path);
    } else if (a.cv_source == "both") {
      set = eeg::load_trialset(a.train_path, eeg::Format::binary);
      const auto val = eeg::load_trialset(a.val_path, eeg::Format::binary);
      if (val.fs_hz != set.fs_hz || val.channels.count != set.channels.count)
        throw DataError("cv-source both: sessions disagree on fs or channels");
      set.trials.insert(set.trials.end(), val.trials.begin(),
                        val.trials.end());
      man.add_input(a.train_path);
      man.add_input(a.val_path);
    } else {
      throw ConfigError("unknown cv-source '" + a.cv_source + "'");
    }
    auto out = eval::intra_session_eval<T>(set, cfg);
    report.rows.push_back(out.row);
    runs = std::move(out.runs);
    weights_source = std::move(set);
  } else if (a.mode == "inter") {
    if (a.train_path == a.val_path)
      throw DataError("inter mode: train and test paths are identical");
    auto s1 = eeg::load_trialset(a.train_path, eeg::Format::binary);
    auto s2 = eeg::load_trialset(a.val_path, eeg::Format::binary);
    man.add_input(a.train_path);
    man.add_input(a.val_path);
    auto out = eval::inter_session_eval<T>(s1, s2, cfg);
    report.rows.push_back(out.row);
    runs = std::move(out.runs);
    weights_source = std::move(s1);
  } else {
    throw ConfigError("unknown mode '" + a.mode + "'");
  }

  const fs::path report_csv = a.out_dir / "report.csv";
  const fs::path report_txt = a.out_dir / "report.txt";
  {
    std::ofstream f(report_csv, std::ios::trunc);
    f << eval::render_report_csv(report);
  }
  {
    std::ofstream f(report_txt, std::ios::trunc);
    f << eval::render_report_text(report);
  }
  man.add_output(report_csv);
  man.add_output(report_txt);

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const fs::path model_path =
        a.out_dir / (a.mode == "intra"
                         ? "model_fold" + std::to_string(r) + ".minet"
                         : std::string("model.minet"));
    const fs::path hist_path =
        a.out_dir / (a.mode == "intra"
                         ? "history_fold" + std::to_string(r) + ".csv"
                         : std::string("history.csv"));
    net::save_checkpoint(runs[r].model, model_path);
    net::write_history_csv(runs[r].history, hist_path);
    man.add_output(model_path);
    man.add_output(hist_path);
  }

  if (a.dump_weights) {
    const fs::path wpath = a.out_dir / "weights.csv";
    dump_weights_csv(weights_source, cfg.preprocess, wpath, a.threads);
    man.add_output(wpath);
  }

  man.write(a.out_dir / "manifest.json");
  std::cout << eval::render_report_text(report);
  return kExitOk;
}

int cmd_run(const RunArgs& a) {
  const auto cfg = make_eval_config(a);
  manifest::Manifest man("run");
  man.set_seed(a.seed);
  auto& j = man.config();
  j["mode"] = a.mode;
  j["cv_source"] = a.cv_source;
  j["band"] = {a.f_low, a.f_high};
  j["filter_order"] = a.filter_order;
  j["filter_scope"] = a.filter_scope;
  j["mi_window"] = {a.mi_t0, a.mi_t1};
  j["window_s"] = a.window_s;
  j["overlap"] = a.overlap;
  j["emphasis_mode"] = a.emphasis_mode;
  j["emphasis_band"] = {a.emphasis_f1, a.emphasis_f2};
  j["epochs"] = a.epochs;
  j["batch_size"] = a.batch;
  j["learning_rate"] = a.lr;
  j["dropout_p"] = a.dropout;
  j["precision"] = a.precision;
  j["folds"] = a.folds;
  j["threads"] = a.threads;
  j["kernel_backend"] = kernels::backend_name(kernels::active_backend());

  if (a.precision == "f64") return run_with_precision<double>(a, cfg, man);
  if (a.precision == "f32") return run_with_precision<float>(a, cfg, man);
  throw ConfigError("unknown precision '" + a.precision + "'");
}

struct PsdDumpArgs {
  fs::path in, out;
  double t0{6.0}, t1{10.0};
  std::optional<double> f1, f2;
  std::vector<std::size_t> trials;
  std::vector<std::size_t> channels;
  bool filtered{false};
  double f_low{8.0}, f_high{30.0};
  std::size_t filter_order{30};
};

int cmd_psd_dump(const PsdDumpArgs& a) {
  const auto set = eeg::load_trialset(a.in, eeg::Format::binary);
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw IoError("cannot write " + a.out.string());
  f << "subject,trial,channel,freq_hz,power\n";

  std::optional<dsp::FirKernel> kernel;
  if (a.filtered)
    kernel = dsp::design_bandpass_fir(
        {a.filter_order, a.f_low, a.f_high, set.fs_hz, dsp::FirWindow::hamming});

  auto selected = [](const std::vector<std::size_t>& filter, std::size_t v) {
    if (filter.empty()) return true;
    for (auto x : filter)
      if (x == v) return true;
    return false;
  };

  char buf[160];
  for (std::size_t ti = 0; ti < set.trials.size(); ++ti) {
    if (!selected(a.trials, ti)) continue;
    eeg::Epoch epoch = eeg::extract_epoch(set.trials[ti], a.t0, a.t1);
    if (kernel)
      for (std::size_t c = 0; c < epoch.data.rows; ++c) {
        auto y = dsp::filtfilt(*kernel, {epoch.data.row(c), epoch.data.cols});
        std::copy(y.begin(), y.end(), epoch.data.row(c));
      }
    const auto plan = dsp::PsdPlan::get(epoch.data.cols, epoch.fs_hz);
    for (std::size_t c = 0; c < epoch.data.rows; ++c) {
      if (!selected(a.channels, c)) continue;
      const auto psd = plan->estimate({epoch.data.row(c), epoch.data.cols});
      for (std::size_t b = 0; b < psd.freqs_hz.size(); ++b) {
        if (a.f1 && psd.freqs_hz[b] < *a.f1) continue;
        if (a.f2 && psd.freqs_hz[b] > *a.f2) continue;
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.9g,%.9g\n",
                      set.trials[ti].subject_id.c_str(), ti, c,
                      psd.freqs_hz[b], psd.power[b]);
        f << buf;
      }
    }
  }
  if (!f) throw IoError("write failed: " + a.out.string());
  return kExitOk;
}

struct ReportArgs {
  std::vector<fs::path> inputs;
  std::string format{"text"};
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  eval::Report merged;
  for (const auto& p : a.inputs) eval::merge_into(merged, eval::read_report_csv(p));
  const std::string rendered = a.format == "csv"
                                   ? eval::render_report_csv(merged)
                                   : eval::render_report_text(merged);
  if (a.out.empty()) {
    std::cout << rendered;
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.out);
    f << rendered;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-emphasis motor imagery decoding pipeline"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic trial set");
  synth_cmd->add_option("--profile", sa.profile, "separable | default");
  synth_cmd->add_option("--profile-file", sa.profile_file, "JSON profile path");
  synth_cmd->add_option("--out", sa.out, "output .mieeg path")->required();
  synth_cmd->add_option("--seed", sa.seed)->envname("MIEMPH_SEED");
  synth_cmd->add_option("--channels", sa.channels);
  synth_cmd->add_option("--trials-per-class", sa.trials_per_class);
  synth_cmd->add_option("--session", sa.session);
  synth_cmd->add_option("--subject", sa.subject);
  synth_cmd->add_option("--noise-amp", sa.noise_amp);
  synth_cmd->add_option("--amp-scale", sa.amp_scale);
  synth_cmd->add_option("--freq-jitter", sa.freq_jitter);
  synth_cmd->add_option("--save-profile", sa.save_profile,
                        "write the effective profile JSON here");

  ImportArgs ia;
  auto* import_cmd = app.add_subcommand("import", "convert between CSV and binary");
  import_cmd->add_option("--in", ia.in)->required();
  import_cmd->add_option("--out", ia.out)->required();
  import_cmd->add_option("--in-format", ia.in_format, "csv | binary (default: by extension)");
  import_cmd->add_option("--out-format", ia.out_format, "csv | binary (default: by extension)");
  import_cmd->add_option("--fs", ia.fs_hint, "sampling rate for CSV inputs without # fs_hz=");

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "preprocess, train and evaluate");
  run_cmd->add_option("--mode", ra.mode, "intra | inter")->required();
  run_cmd->add_option("--train", ra.train_path, "training-session file");
  run_cmd->add_option("--val", ra.val_path, "validation-session file");
  run_cmd->add_option("--cv-source", ra.cv_source,
                      "intra CV source: validation | training | both");
  run_cmd->add_option("--out-dir", ra.out_dir)->required();
  run_cmd->add_option("--f-low", ra.f_low);
  run_cmd->add_option("--f-high", ra.f_high);
  run_cmd->add_option("--filter-order", ra.filter_order);
  run_cmd->add_option("--filter-scope", ra.filter_scope, "trial | epoch");
  run_cmd->add_option("--mi-t0", ra.mi_t0);
  run_cmd->add_option("--mi-t1", ra.mi_t1);
  run_cmd->add_option("--window-s", ra.window_s);
  run_cmd->add_option("--overlap", ra.overlap);
  run_cmd->add_option("--emphasis-mode", ra.emphasis_mode,
                      "linear-mean-norm | db-raw | minmax");
  run_cmd->add_option("--emphasis-f1", ra.emphasis_f1);
  run_cmd->add_option("--emphasis-f2", ra.emphasis_f2);
  run_cmd->add_option("--epochs", ra.epochs);
  run_cmd->add_option("--batch", ra.batch);
  run_cmd->add_option("--lr", ra.lr);
  run_cmd->add_option("--dropout", ra.dropout);
  run_cmd->add_option("--precision", ra.precision, "f32 | f64");
  run_cmd->add_option("--folds", ra.folds);
  run_cmd->add_option("--threads", ra.threads);
  run_cmd->add_option("--seed", ra.seed)->envname("MIEMPH_SEED");
  run_cmd->add_flag("--dump-weights", ra.dump_weights,
                    "write per-trial emphasis weights CSV");

  PsdDumpArgs pa;
  auto* psd_cmd = app.add_subcommand("psd-dump", "per-channel PSD CSV");
  psd_cmd->add_option("--in", pa.in)->required();
  psd_cmd->add_option("--out", pa.out)->required();
  psd_cmd->add_option("--t0", pa.t0);
  psd_cmd->add_option("--t1", pa.t1);
  psd_cmd->add_option("--f1", pa.f1);
  psd_cmd->add_option("--f2", pa.f2);
  psd_cmd->add_option("--trial", pa.trials, "restrict to these trial indices");
  psd_cmd->add_option("--channel", pa.channels, "restrict to these channels");
  psd_cmd->add_flag("--filtered", pa.filtered, "band-pass before the PSD");
  psd_cmd->add_option("--f-low", pa.f_low);
  psd_cmd->add_option("--f-high", pa.f_high);
  psd_cmd->add_option("--filter-order", pa.filter_order);

  ReportArgs rpa;
  auto* report_cmd = app.add_subcommand("report", "merge and render run reports");
  report_cmd->add_option("inputs", rpa.inputs, "report CSV files")->required();
  report_cmd->add_option("--format", rpa.format, "text | csv");
  report_cmd->add_option("--out", rpa.out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(sa);
    if (import_cmd->parsed()) return cmd_import(ia);
    if (run_cmd->parsed()) {
      if (ra.mode == "inter" &&
          (ra.train_path.empty() || ra.val_path.empty()))
        throw ConfigError("inter mode needs --train and --val");
      if (ra.mode == "intra") {
        if (ra.cv_source == "validation" && ra.val_path.empty())
          throw ConfigError("cv-source validation needs --val");
        if (ra.cv_source == "training" && ra.train_path.empty())
          throw ConfigError("cv-source training needs --train");
        if (ra.cv_source == "both" &&
            (ra.train_path.empty() || ra.val_path.empty()))
          throw ConfigError("cv-source both needs --train and --val");
      }
      return cmd_run(ra);
    }
    if (psd_cmd->parsed()) return cmd_psd_dump(pa);
    if (report_cmd->parsed()) return cmd_report(rpa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}
