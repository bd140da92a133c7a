#include "miemph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace miemph::eval {

void PreprocessConfig::validate() const {
  if (!(f_low_hz > 0.0) || !(f_low_hz < f_high_hz))
    throw ConfigError("band edges must satisfy 0 < f_low < f_high");
  if (filter_order == 0 || filter_order % 2 != 0)
    throw ConfigError("filter order must be a positive even integer");
  if (!(mi_t0_s >= 0.0) || !(mi_t0_s < mi_t1_s))
    throw ConfigError("MI window must satisfy 0 <= t0 < t1");
  window.validate();
  emphasis.validate();
}

std::vector<TrialWindows> preprocess(const eeg::TrialSet& set,
                                     const PreprocessConfig& cfg,
                                     std::size_t threads) {
  cfg.validate();
  set.validate();
  const dsp::FirKernel kernel = dsp::design_bandpass_fir(
      {cfg.filter_order, cfg.f_low_hz, cfg.f_high_hz, set.fs_hz,
       dsp::FirWindow::hamming});

  // Pre-build the PSD plan outside the parallel region.
  const std::size_t epoch_len = static_cast<std::size_t>(
      std::lround((cfg.mi_t1_s - cfg.mi_t0_s) * set.fs_hz));
  dsp::PsdPlan::get(epoch_len, set.fs_hz);

  std::vector<TrialWindows> out(set.trials.size());
  parallel_for(set.trials.size(), threads, [&](std::size_t, std::size_t i) {
    const eeg::Trial& trial = set.trials[i];
    eeg::Epoch epoch;
    if (cfg.filter_scope == PreprocessConfig::FilterScope::trial) {
      eeg::Trial filtered = trial;
      for (std::size_t c = 0; c < trial.n_channels(); ++c) {
        auto y = dsp::filtfilt(kernel, {trial.data.row(c), trial.n_samples()});
        std::copy(y.begin(), y.end(), filtered.data.row(c));
      }
      epoch = eeg::extract_epoch(filtered, cfg.mi_t0_s, cfg.mi_t1_s);
    } else {
      epoch = eeg::extract_epoch(trial, cfg.mi_t0_s, cfg.mi_t1_s);
      for (std::size_t c = 0; c < epoch.data.rows; ++c) {
        auto y = dsp::filtfilt(kernel, {epoch.data.row(c), epoch.data.cols});
        std::copy(y.begin(), y.end(), epoch.data.row(c));
      }
    }

    TrialWindows tw;
    tw.trial_id =
        (static_cast<std::int64_t>(trial.session_id) << 32) |
        static_cast<std::int64_t>(i);
    tw.label = trial.label;
    tw.weights = emphasis::compute_weights(epoch, cfg.emphasis);
    for (const Matrix& w : dsp::slide_windows(epoch, cfg.window))
      tw.windows.push_back(emphasis::apply_emphasis(w, tw.weights));
    out[i] = std::move(tw);
  });
  return out;
}

FoldPlan make_folds(const std::vector<std::uint8_t>& labels,
                    std::size_t n_folds, std::uint64_t seed, bool stratified) {
  if (n_folds < 2) throw ConfigError("need at least 2 folds");
  if (labels.size() < n_folds)
    throw DataError("too few trials for " + std::to_string(n_folds) +
                    " folds");
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.stratified = stratified;
  plan.seed = seed;
  plan.assignment.assign(labels.size(), -1);
  rng::Xoshiro256pp gen(seed);

  if (stratified) {
    std::map<std::uint8_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
      by_class[labels[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
      if (idx.size() < n_folds)
        throw DataError("class " + std::to_string(cls) + " has only " +
                        std::to_string(idx.size()) + " trials, need >= " +
                        std::to_string(n_folds) + " for stratified folds");
    std::size_t next_fold = 0;
    for (auto& [cls, idx] : by_class) {
      gen.shuffle(idx);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        plan.assignment[idx[j]] = static_cast<int>(next_fold % n_folds);
        ++next_fold;
      }
    }
  } else {
    std::vector<std::size_t> idx(labels.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    gen.shuffle(idx);
    for (std::size_t j = 0; j < idx.size(); ++j)
      plan.assignment[idx[j]] = static_cast<int>(j % n_folds);
  }
  return plan;
}

Metrics metrics_from_probs(const std::vector<std::array<double, 3>>& probs,
                           const std::vector<std::int64_t>& trial_ids,
                           const std::vector<std::uint8_t>& labels) {
  if (probs.size() != trial_ids.size() || probs.size() != labels.size())
    throw DataError("metrics: length mismatch");
  if (probs.empty()) throw DataError("metrics: no windows");

  Metrics m;
  m.n_windows = probs.size();

  std::size_t window_correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    int pred = 0;
    for (int c = 1; c < 3; ++c)
      if (probs[i][c] > probs[i][pred]) pred = c;
    if (pred == labels[i]) ++window_correct;
  }
  m.window_accuracy =
      static_cast<double>(window_correct) / static_cast<double>(probs.size());

  // group windows by trial, first-seen order
  std::vector<std::int64_t> order;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    std::size_t g = 0;
    for (; g < order.size(); ++g)
      if (order[g] == trial_ids[i]) break;
    if (g == order.size()) {
      order.push_back(trial_ids[i]);
      groups.emplace_back();
    } else if (labels[groups[g].front()] != labels[i]) {
      throw DataError("metrics: trial " + std::to_string(trial_ids[i]) +
                      " carries mixed labels");
    }
    groups[g].push_back(i);
  }

  m.n_trials = groups.size();
  std::size_t trial_correct = 0;
  std::array<std::size_t, 3> class_total{}, class_correct{};
  for (const auto& g : groups) {
    std::vector<std::array<double, 3>> tp;
    tp.reserve(g.size());
    for (auto i : g) tp.push_back(probs[i]);
    const int pred = net::aggregate_trial_prediction(tp);
    const std::uint8_t truth = labels[g.front()];
    ++class_total[truth];
    if (pred == truth) {
      ++trial_correct;
      ++class_correct[truth];
    }
  }
  m.trial_accuracy =
      static_cast<double>(trial_correct) / static_cast<double>(groups.size());
  for (int c = 0; c < 3; ++c)
    m.per_class_accuracy[c] =
        class_total[c] ? static_cast<double>(class_correct[c]) /
                             static_cast<double>(class_total[c])
                       : 0.0;
  return m;
}

double SubjectResult::mean_trial_accuracy() const {
  if (folds.empty()) throw DataError("report row has no folds");
  double s = 0.0;
  for (const auto& f : folds) s += f.metrics.trial_accuracy;
  return s / static_cast<double>(folds.size());
}

double SubjectResult::std_trial_accuracy() const {
  const double mean = mean_trial_accuracy();
  double ss = 0.0;
  for (const auto& f : folds) {
    const double d = f.metrics.trial_accuracy - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(folds.size()));
}

namespace {

std::string fmt_pct(double mean, double stdev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%% (± %.2f)", 100.0 * mean,
                100.0 * stdev);
  return buf;
}

void render_mode_table(std::string& out, const std::string& mode,
                       const std::vector<const SubjectResult*>& rows) {
  out += "mode: " + mode + "\n";
  out += "Subject         Accuracy\n";
  std::vector<double> means;
  for (const auto* r : rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-15s %s\n", r->subject.c_str(),
                  fmt_pct(r->mean_trial_accuracy(), r->std_trial_accuracy())
                      .c_str());
    out += line;
    means.push_back(r->mean_trial_accuracy());
  }
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(means.size());
  double ss = 0.0;
  for (double v : means) ss += (v - grand) * (v - grand);
  const double grand_std = std::sqrt(ss / static_cast<double>(means.size()));
  char line[128];
  std::snprintf(line, sizeof(line), "%-15s %s\n", "Avg.",
                fmt_pct(grand, grand_std).c_str());
  out += line;
}

}  // namespace

std::string render_report_text(const Report& report) {
  if (report.rows.empty()) throw DataError("empty report");
  std::string out;
  out += "Motor imagery decoding report\n";
  out += "trial-level accuracy, mean (± population std) across folds;\n";
  out += "Avg. row is the mean (± population std) across subjects\n\n";
  for (const std::string mode : {"intra", "inter"}) {
    std::vector<const SubjectResult*> rows;
    for (const auto& r : report.rows)
      if (r.mode == mode) rows.push_back(&r);
    if (rows.empty()) continue;
    render_mode_table(out, mode, rows);
    out += "\n";
  }
  return out;
}

std::string render_report_csv(const Report& report) {
  if (report.rows.empty()) throw DataError("empty report");
  std::string out = "subject,mode,fold,trial_acc,window_acc,n_trials\n";
  char line[256];
  for (const auto& r : report.rows)
    for (const auto& f : r.folds) {
      std::snprintf(line, sizeof(line), "%s,%s,%d,%.9g,%.9g,%zu\n",
                    r.subject.c_str(), r.mode.c_str(), f.fold,
                    f.metrics.trial_accuracy, f.metrics.window_accuracy,
                    f.metrics.n_trials);
      out += line;
    }
  return out;
}

Report read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("subject,mode,fold,trial_acc", 0) != 0)
    throw DataError("malformed report CSV header in " + path.string());
  Report report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string subject, mode, tok;
    FoldResult fr;
    std::getline(ss, subject, ',');
    std::getline(ss, mode, ',');
    std::getline(ss, tok, ',');
    fr.fold = std::stoi(tok);
    std::getline(ss, tok, ',');
    fr.metrics.trial_accuracy = std::stod(tok);
    std::getline(ss, tok, ',');
    fr.metrics.window_accuracy = std::stod(tok);
    std::getline(ss, tok, ',');
    fr.metrics.n_trials = std::stoul(tok);

    SubjectResult* row = nullptr;
    for (auto& r : report.rows)
      if (r.subject == subject && r.mode == mode) row = &r;
    if (!row) {
      report.rows.push_back({subject, mode, {}});
      row = &report.rows.back();
    }
    row->folds.push_back(fr);
  }
  if (report.rows.empty()) throw DataError("empty report CSV " + path.string());
  return report;
}

void merge_into(Report& into, const Report& from) {
  for (const auto& r : from.rows) {
    for (const auto& existing : into.rows)
      if (existing.subject == r.subject && existing.mode == r.mode)
        throw DataError("duplicate report rows for subject '" + r.subject +
                        "' mode " + r.mode);
    into.rows.push_back(r);
  }
}

}  // namespace miemph::eval
