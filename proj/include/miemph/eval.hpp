#pragma once

// Evaluation protocols: stratified 5-fold cross-validation within one
// session and session-to-session transfer, both on windows produced by
// the shared preprocessing chain (band-pass -> MI epoch -> sliding
// windows -> per-trial PSD emphasis). Reporting mirrors the per-subject
// "mean% (± std)" table layout.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "miemph/dsp.hpp"
#include "miemph/eeg.hpp"
#include "miemph/emphasis.hpp"
#include "miemph/errors.hpp"
#include "miemph/net.hpp"
#include "miemph/parallel.hpp"
#include "miemph/rng.hpp"

namespace miemph::eval {

struct PreprocessConfig {
  double f_low_hz{8.0};
  double f_high_hz{30.0};
  std::size_t filter_order{30};
  // Whether the band-pass runs over the full trial before the MI epoch is
  // cut (default; keeps filter transients outside the analysis segment)
  // or over the extracted epoch itself.
  enum class FilterScope { trial, epoch };
  FilterScope filter_scope{FilterScope::trial};
  double mi_t0_s{6.0};
  double mi_t1_s{10.0};
  dsp::WindowSpec window{};
  emphasis::EmphasisConfig emphasis{};

  void validate() const;
};

struct TrialWindows {
  std::int64_t trial_id{0};  // (session_id << 32) | trial index
  std::uint8_t label{0};
  emphasis::EmphasisWeights weights;
  std::vector<Matrix> windows;  // emphasized, [channels x win_samples]
};

std::vector<TrialWindows> preprocess(const eeg::TrialSet& set,
                                     const PreprocessConfig& cfg,
                                     std::size_t threads = 0);

struct FoldPlan {
  std::size_t n_folds{5};
  std::vector<int> assignment;  // trial index -> fold id
  bool stratified{true};
  std::uint64_t seed{0};
};

// Trial-level partition; stratified plans balance per-class counts across
// folds to within one trial.
FoldPlan make_folds(const std::vector<std::uint8_t>& labels,
                    std::size_t n_folds, std::uint64_t seed,
                    bool stratified = true);

struct Metrics {
  double trial_accuracy{0.0};
  double window_accuracy{0.0};
  std::array<double, 3> per_class_accuracy{};
  std::size_t n_trials{0};
  std::size_t n_windows{0};
};

// Window probabilities -> window/trial metrics. Windows of one trial must
// share its label; trial predictions use aggregate_trial_prediction.
Metrics metrics_from_probs(const std::vector<std::array<double, 3>>& probs,
                           const std::vector<std::int64_t>& trial_ids,
                           const std::vector<std::uint8_t>& labels);

struct FoldResult {
  int fold{0};
  Metrics metrics;
};

struct SubjectResult {
  std::string subject;
  std::string mode;  // "intra" | "inter"
  std::vector<FoldResult> folds;

  double mean_trial_accuracy() const;
  double std_trial_accuracy() const;  // population std over folds
};

struct Report {
  std::vector<SubjectResult> rows;
};

struct EvalConfig {
  PreprocessConfig preprocess{};
  net::ModelSpec model{};  // n_channels/in_samples are set from the data
  net::TrainConfig train{};
  std::size_t n_folds{5};
  std::uint64_t seed{0};
};

template <typename T>
struct SessionEval {
  SubjectResult row;
  std::vector<net::TrainResult<T>> runs;  // one per fold (intra) or one (inter)
};

template <typename T>
SessionEval<T> intra_session_eval(const eeg::TrialSet& session,
                                  const EvalConfig& cfg);

// Trains on all of the first session, tests once on the second. Nothing
// from the test session reaches training: no validation snapshots, fold
// plans or emphasis statistics (weights are per-trial by construction).
template <typename T>
SessionEval<T> inter_session_eval(const eeg::TrialSet& train_session,
                                  const eeg::TrialSet& test_session,
                                  const EvalConfig& cfg);

std::string render_report_text(const Report& report);
std::string render_report_csv(const Report& report);
Report read_report_csv(const std::filesystem::path& path);
void merge_into(Report& into, const Report& from);

// ----- template implementations ------------------------------------------

namespace detail {

template <typename T>
net::WindowSet<T> to_window_set(const std::vector<TrialWindows>& trials,
                                const std::vector<std::size_t>& indices) {
  net::WindowSet<T> ws;
  for (std::size_t i : indices)
    for (const Matrix& w : trials[i].windows)
      ws.append(w, trials[i].label, trials[i].trial_id);
  return ws;
}

inline std::string subject_of(const eeg::TrialSet& set) {
  return set.trials.empty() ? std::string("?") : set.trials[0].subject_id;
}

inline void assert_fold_disjoint(const std::vector<std::size_t>& train_idx,
                                 const std::vector<std::size_t>& test_idx) {
  for (auto a : train_idx)
    for (auto b : test_idx)
      if (a == b) throw DataError("fold leakage: trial in both splits");
}

}  // namespace detail

template <typename T>
SessionEval<T> intra_session_eval(const eeg::TrialSet& session,
                                  const EvalConfig& cfg) {
  const auto trials = preprocess(session, cfg.preprocess, cfg.train.threads);
  std::vector<std::uint8_t> labels(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) labels[i] = trials[i].label;

  const FoldPlan plan = make_folds(
      labels, cfg.n_folds, rng::derive_seed(cfg.seed, "folds"), true);

  net::ModelSpec spec = cfg.model;
  spec.n_channels = trials[0].windows[0].rows;
  spec.in_samples = trials[0].windows[0].cols;

  SessionEval<T> out;
  out.row.subject = detail::subject_of(session);
  out.row.mode = "intra";

  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < trials.size(); ++i)
      (plan.assignment[i] == static_cast<int>(f) ? test_idx : train_idx)
          .push_back(i);
    detail::assert_fold_disjoint(train_idx, test_idx);

    auto train_ws = detail::to_window_set<T>(trials, train_idx);
    auto test_ws = detail::to_window_set<T>(trials, test_idx);

    net::TrainConfig tcfg = cfg.train;
    tcfg.seed = rng::derive_seed(cfg.seed, "fold", f);
    auto run = net::train(spec, train_ws, test_ws, tcfg);

    const auto probs = net::evaluate(run.model, test_ws, cfg.train.threads);
    FoldResult fr;
    fr.fold = static_cast<int>(f);
    fr.metrics = metrics_from_probs(probs, test_ws.trial_ids, test_ws.labels);
    out.row.folds.push_back(fr);
    out.runs.push_back(std::move(run));
  }
  return out;
}

template <typename T>
SessionEval<T> inter_session_eval(const eeg::TrialSet& train_session,
                                  const eeg::TrialSet& test_session,
                                  const EvalConfig& cfg) {
  if (train_session.trials.empty() || test_session.trials.empty())
    throw DataError("inter-session evaluation needs two non-empty sessions");
  for (const auto& a : train_session.trials)
    for (const auto& b : test_session.trials)
      if (a.subject_id == b.subject_id && a.session_id == b.session_id)
        throw DataError("session leakage: subject '" + a.subject_id +
                        "' session " + std::to_string(a.session_id) +
                        " appears in both train and test sets");

  const auto train_trials =
      preprocess(train_session, cfg.preprocess, cfg.train.threads);
  const auto test_trials =
      preprocess(test_session, cfg.preprocess, cfg.train.threads);

  std::vector<std::size_t> all_train(train_trials.size()),
      all_test(test_trials.size());
  for (std::size_t i = 0; i < all_train.size(); ++i) all_train[i] = i;
  for (std::size_t i = 0; i < all_test.size(); ++i) all_test[i] = i;

  auto train_ws = detail::to_window_set<T>(train_trials, all_train);
  auto test_ws = detail::to_window_set<T>(test_trials, all_test);

  net::ModelSpec spec = cfg.model;
  spec.n_channels = train_trials[0].windows[0].rows;
  spec.in_samples = train_trials[0].windows[0].cols;

  net::TrainConfig tcfg = cfg.train;
  tcfg.seed = rng::derive_seed(cfg.seed, "inter");
  auto run = net::train(spec, train_ws, net::WindowSet<T>{}, tcfg);

  const auto probs = net::evaluate(run.model, test_ws, cfg.train.threads);
  SessionEval<T> out;
  out.row.subject = detail::subject_of(train_session);
  out.row.mode = "inter";
  FoldResult fr;
  fr.fold = 0;
  fr.metrics = metrics_from_probs(probs, test_ws.trial_ids, test_ws.labels);
  out.row.folds.push_back(fr);
  out.runs.push_back(std::move(run));
  return out;
}

}  // namespace miemph::eval
