#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "cael/models.hpp"
#include "cael/types.hpp"

namespace cael::harness {

inline constexpr const char* kIps = "IPS";
inline constexpr const char* kDm = "DM";
inline constexpr const char* kAelMips = "AEL-MIPS";
inline constexpr const char* kCaelMips = "CAEL-MIPS";

/// Settings for runs on real logged data (Open Bandit Dataset layout).
struct ObdConfig {
  std::string data_path;
  std::string mapping_path;        // empty: bundled default layout
  std::string target_probs_path;   // per-row target action probabilities
  std::string target_log_path;     // optional on-policy log: ground truth
  std::optional<double> ground_truth;
  std::optional<long> max_rows;  // cap applied while loading
  int n = 10000;                 // samples drawn per run
  int runs = 30;
};

/// One experiment definition; everything a run needs, including the seed.
struct ExperimentConfig {
  int context_dim = 5;
  int num_actions = 100;
  double epsilon = 0.2;
  double reward_std = 1.0;
  int n = 1000;
  int trials = 30;
  std::vector<std::string> estimators = {kIps, kDm, kAelMips, kCaelMips};
  models::TrainConfig train;
  long mc_contexts = 1000000;
  RngSeed seed = 1;
  std::string sweep_param;  // n | num_actions | epsilon | reward_std
  std::vector<double> sweep_values;
  std::string out_dir = "out";
  int threads = 0;  // 0: hardware concurrency
  bool dm_independent_head = false;
  int sweep_trials_n = 100;      // trials per grid value when sweeping n
  int sweep_trials_other = 30;   // trials for the other sweep parameters
  int verify_instances = 120;
  int bootstrap_resamples = 10000;
  ObdConfig obd;

  void validate() const;
  static ExperimentConfig from_json(const std::string& json_text);
  static ExperimentConfig from_json_file(const std::string& path);
  /// Applies one dotted-path override, e.g. ("train.rho", "10") or
  /// ("estimators", "[\"IPS\"]"). Values are parsed as JSON; bare strings
  /// are accepted.
  void apply_override(const std::string& dotted_key, const std::string& value);
  std::string to_json() const;
};

/// Aggregated metrics for one estimator at one sweep point.
struct MetricsRow {
  std::string estimator;
  std::string sweep_param = "none";
  double sweep_value = 0.0;
  double mse = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
  double ci_low = 0.0;   // 95% bootstrap interval on the MSE
  double ci_high = 0.0;
  int trials = 0;
};

/// Point estimates from one trial, keyed by estimator name.
struct TrialResult {
  std::map<std::string, double> values;
  bool failed = false;
  std::string error;
};

/// One dataset draw + model training + every configured estimator.
TrialResult run_trial(const ExperimentConfig& config, RngSeed trial_seed);

/// Runs `trials` trials in a worker pool; results are ordered by trial
/// index so the aggregation is deterministic for any thread count. Failed
/// trials are reported on `log` (when given) and excluded downstream.
std::vector<TrialResult> run_trials(const ExperimentConfig& config, int trials,
                                    std::ostream* log = nullptr);

/// Bias/variance/MSE aggregation under the population-variance convention
/// (so mse == bias^2 + variance exactly), with a seeded bootstrap CI on the
/// MSE. Needs at least 2 values.
MetricsRow aggregate(const std::string& estimator,
                     std::span<const double> values, double ground_truth,
                     int bootstrap_resamples, RngSeed seed);

/// Empirical CDF of per-run squared errors divided by the baseline
/// estimator's squared error, paired run by run.
struct CdfTable {
  std::string estimator;
  std::vector<double> ratios;  // ascending
  double cdf_at(double ratio) const;  // fraction of ratios <= ratio
};
std::vector<CdfTable> relative_error_cdf(
    const std::vector<std::string>& estimator_order,
    const std::map<std::string, std::vector<double>>& squared_errors,
    const std::string& baseline, std::ostream* log = nullptr);

/// CSV + SVG emission. metrics.csv has the fixed header
/// estimator,sweep_param,sweep_value,mse,bias_sq,variance,ci_low,ci_high,trials
/// and cdf.csv (when tables are present) estimator,ratio,cdf. Charts are
/// written as self-contained SVG with log-scale value axes.
void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path);
void write_cdf_csv(const std::vector<CdfTable>& tables,
                   const std::string& path);
void emit_outputs(const std::vector<MetricsRow>& rows,
                  const std::vector<CdfTable>& cdfs,
                  const std::string& out_dir);

/// Subcommand drivers. Each writes its artifacts under out_dir and throws
/// ConfigError / DataError / IoError on failure.
void run_synth(const ExperimentConfig& config, const std::string& out_dir,
               std::ostream* log = nullptr);
void run_sweep(const ExperimentConfig& config, const std::string& param,
               const std::vector<double>& values, const std::string& out_dir,
               std::ostream* log = nullptr);
void run_obd(const ExperimentConfig& config, const std::string& out_dir,
             std::ostream* log = nullptr);
/// Re-renders charts and prints a summary from an existing output directory.
void run_report(const std::string& dir, std::ostream& out);
/// Prints the oracle identity suite results; returns true when all pass.
bool run_verify(const ExperimentConfig& config, std::ostream& out);

}  // namespace cael::harness
