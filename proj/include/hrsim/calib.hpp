#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hrsim {

/// Parameters of the calibration map f(x) = 1 / (1 + exp(a x + b)).
struct LogisticParams {
  double a = 0.0;
  double b = 0.0;
};

/// Evaluates the map without overflow; saturates to 0 or 1 at the limits.
double logistic(double x, const LogisticParams& p);

struct FitOptions {
  int a_grid_points = 201;     ///< over a in [-100, 0] on standardized scores
  int b_scan_points = 201;
  int golden_iterations = 80;
  int nelder_mead_iterations = 4000;
};

/// Least-squares fit of the logistic map to (raw score, WCS) pairs. Fully
/// deterministic: grid over a, per-a line search over b, then Nelder-Mead.
/// Throws DataError with fewer than 3 pairs or constant raw scores.
LogisticParams fit_logistic(std::span<const std::pair<double, double>> pairs,
                            const FitOptions& options = {});

double rmse(std::span<const double> pred, std::span<const double> truth);

/// Pearson correlation. Throws DataError if either input has zero variance.
double ncc(std::span<const double> pred, std::span<const double> truth);

enum class TauVariant { A, B };

/// Kendall's tau in O(n log n). Tau-b by default: pairs tied in both inputs
/// are dropped, pairs tied in one input count in that input's denominator.
double kendall_tau(std::span<const double> pred, std::span<const double> truth,
                   TauVariant variant = TauVariant::B);

enum class Grouping { Trial, Listener, System };

std::string to_string(Grouping g);
Grouping parse_grouping(const std::string& name);

struct PredictionRecord {
  std::string signal_id;
  std::string listener_id;
  std::string system_id;
  double raw_score = 0.0;
  double mapped_score = 0.0;
  double correctness = 0.0;
};

std::vector<PredictionRecord> apply_mapping(std::vector<PredictionRecord> records,
                                            const LogisticParams& p);

struct GroupSummary {
  std::string id;
  std::size_t n = 0;
  double mean_wcs = 0.0, se_wcs = 0.0;
  double mean_pred = 0.0, se_pred = 0.0;
  double mean_raw = 0.0;
};

/// Metrics are absent when undefined (zero variance, all pairs tied).
/// RMSE and NCC use mapped predictions, KT uses raw scores; the *_raw fields
/// give RMSE and NCC on raw scores for comparison.
struct EvalReport {
  Grouping grouping = Grouping::Trial;
  std::size_t n_trials = 0;
  std::size_t n_points = 0;
  std::optional<double> rmse, ncc, kt, rmse_raw, ncc_raw;
  std::vector<GroupSummary> groups;  ///< empty for trial-level reports
};

EvalReport trial_report(std::span<const PredictionRecord> records);

/// Averages WCS and predictions per listener or system (standard error =
/// sample sd / sqrt(n), 0 for singletons) and scores the group means.
EvalReport group_aggregate(std::span<const PredictionRecord> records, Grouping by);

}  // namespace hrsim
