#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include "cael/estimators.hpp"
#include "cael/harness.hpp"
#include "cael/synthetic.hpp"

namespace cael::harness {

namespace {

bool wants(const ExperimentConfig& cfg, const char* name) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), name) !=
         cfg.estimators.end();
}

std::vector<ContextVector> dataset_contexts(const Dataset& data) {
  std::vector<ContextVector> out;
  out.reserve(data.samples.size());
  for (const LoggedSample& s : data.samples) out.push_back(s.context);
  return out;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, RngSeed trial_seed) {
  cfg.validate();
  TrialResult result;
  try {
    const synthetic::SyntheticEnv env(cfg.context_dim, cfg.num_actions,
                                      cfg.reward_std, cfg.seed);
    const UniformPolicy mu = uniform_policy(cfg.num_actions);
    const EpsilonGreedyPolicy pi = epsilon_greedy_policy(
        env.mean_reward_fn(), cfg.epsilon, cfg.num_actions);
    const Dataset data = synthetic::generate_dataset(env, mu, cfg.n, trial_seed);

    if (wants(cfg, kIps)) {
      result.values[kIps] = estimators::ips_estimate(data, pi).value;
    }

    const bool needs_cael =
        wants(cfg, kCaelMips) || (wants(cfg, kDm) && !cfg.dm_independent_head);
    if (needs_cael) {
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(trial_seed, 0xCAE1);
      const models::TrainedModels cael =
          models::train_embeddings(data, pi, mu, tc);
      if (wants(cfg, kCaelMips)) {
        result.values[kCaelMips] =
            models::cael_mips_estimate(data, pi, mu, cael.net, cael.posterior)
                .value;
      }
      if (wants(cfg, kDm) && !cfg.dm_independent_head) {
        const estimators::ActionProbs q_hat = models::predict_reward_matrix(
            cael.net, dataset_contexts(data), cfg.num_actions);
        result.values[kDm] =
            estimators::dm_estimate(dataset_contexts(data), pi, q_hat).value;
      }
    }

    if (wants(cfg, kAelMips)) {
      models::TrainConfig tc = cfg.train;
      tc.rho = 0.0;
      tc.gamma = 0.0;
      tc.seed = derive_seed(trial_seed, 0xAE1);
      const models::TrainedModels ael =
          models::train_embeddings(data, pi, mu, tc);
      auto report =
          models::cael_mips_estimate(data, pi, mu, ael.net, ael.posterior);
      result.values[kAelMips] = report.value;
    }

    if (wants(cfg, kDm) && cfg.dm_independent_head) {
      models::TrainConfig tc = cfg.train;
      tc.rho = 0.0;
      tc.gamma = 0.0;
      tc.seed = derive_seed(trial_seed, 0xD0);
      const models::TrainedModels head =
          models::train_embeddings(data, pi, mu, tc);
      const estimators::ActionProbs q_hat = models::predict_reward_matrix(
          head.net, dataset_contexts(data), cfg.num_actions);
      result.values[kDm] =
          estimators::dm_estimate(dataset_contexts(data), pi, q_hat).value;
    }
  } catch (const TrainingDiverged& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

std::vector<TrialResult> run_trials(const ExperimentConfig& cfg, int trials,
                                    std::ostream* log) {
  if (trials < 1) throw InvalidArgument("run_trials: trials must be >= 1");
  std::vector<TrialResult> results(static_cast<std::size_t>(trials));

  int workers = cfg.threads > 0
                    ? cfg.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, trials);

  if (workers == 1) {
    for (int t = 0; t < trials; ++t) {
      results[static_cast<std::size_t>(t)] =
          run_trial(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const int t = next.fetch_add(1);
          if (t >= trials) return;
          results[static_cast<std::size_t>(t)] = run_trial(
              cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  if (log != nullptr) {
    for (int t = 0; t < trials; ++t) {
      if (results[static_cast<std::size_t>(t)].failed) {
        *log << "warning: trial " << t << " failed and is excluded: "
             << results[static_cast<std::size_t>(t)].error << "\n";
      }
    }
  }
  return results;
}

MetricsRow aggregate(const std::string& estimator,
                     std::span<const double> values, double ground_truth,
                     int bootstrap_resamples, RngSeed seed) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw InvalidArgument("aggregate needs at least 2 trials");
  MetricsRow row;
  row.estimator = estimator;
  row.trials = n;

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  const double bias = mean - ground_truth;
  row.bias_sq = bias * bias;

  double var = 0.0;  // population convention: mse == bias_sq + variance
  double mse = 0.0;
  for (double v : values) {
    var += (v - mean) * (v - mean);
    const double err = v - ground_truth;
    mse += err * err;
  }
  row.variance = var / n;
  row.mse = mse / n;

  // Percentile bootstrap on the per-trial squared errors.
  std::vector<double> sq(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double err = values[static_cast<std::size_t>(i)] - ground_truth;
    sq[static_cast<std::size_t>(i)] = err * err;
  }
  Rng rng(seed);
  std::vector<double> boot(static_cast<std::size_t>(bootstrap_resamples));
  for (int b = 0; b < bootstrap_resamples; ++b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      s += sq[rng.uniform_int(static_cast<std::uint64_t>(n))];
    }
    boot[static_cast<std::size_t>(b)] = s / n;
  }
  std::sort(boot.begin(), boot.end());
  auto percentile = [&boot](double p) {
    const double pos = p * (static_cast<double>(boot.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, boot.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return boot[lo] * (1.0 - frac) + boot[hi] * frac;
  };
  row.ci_low = percentile(0.025);
  row.ci_high = percentile(0.975);
  return row;
}

double CdfTable::cdf_at(double ratio) const {
  const auto it = std::upper_bound(ratios.begin(), ratios.end(), ratio);
  return ratios.empty()
             ? 0.0
             : static_cast<double>(it - ratios.begin()) /
                   static_cast<double>(ratios.size());
}

std::vector<CdfTable> relative_error_cdf(
    const std::vector<std::string>& estimator_order,
    const std::map<std::string, std::vector<double>>& squared_errors,
    const std::string& baseline, std::ostream* log) {
  const auto base_it = squared_errors.find(baseline);
  if (base_it == squared_errors.end()) {
    throw InvalidArgument("baseline estimator '" + baseline +
                          "' has no recorded errors");
  }
  const std::vector<double>& base = base_it->second;
  for (const auto& [name, errs] : squared_errors) {
    if (errs.size() != base.size()) {
      throw InvalidArgument("estimator '" + name +
                            "' has a different run count than the baseline");
    }
  }

  // Runs where the baseline error is exactly zero cannot be normalized.
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < base.size(); ++r) {
    if (base[r] == 0.0) {
      if (log != nullptr) {
        *log << "warning: run " << r
             << " excluded from the CDF (baseline squared error is zero)\n";
      }
      continue;
    }
    keep.push_back(r);
  }

  std::vector<CdfTable> tables;
  for (const std::string& name : estimator_order) {
    const auto it = squared_errors.find(name);
    if (it == squared_errors.end()) continue;
    CdfTable t;
    t.estimator = name;
    t.ratios.reserve(keep.size());
    for (std::size_t r : keep) t.ratios.push_back(it->second[r] / base[r]);
    std::sort(t.ratios.begin(), t.ratios.end());
    tables.push_back(std::move(t));
  }
  return tables;
}

}  // namespace cael::harness
