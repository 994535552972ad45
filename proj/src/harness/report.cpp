#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cael/estimators.hpp"
#include "cael/harness.hpp"
#include "cael/obd.hpp"
#include "cael/oracle.hpp"
#include "cael/synthetic.hpp"
#include "svg.hpp"

namespace cael::harness {

namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << content;
  if (!os) throw IoError("failed writing: " + path);
}

// Collects per-estimator value series from trials, skipping failed trials
// entirely so every estimator stays paired run-by-run.
struct SeriesSet {
  std::map<std::string, std::vector<double>> values;
  int used = 0;
};

SeriesSet collect(const std::vector<TrialResult>& trials,
                  const std::vector<std::string>& estimators) {
  SeriesSet s;
  for (const TrialResult& t : trials) {
    if (t.failed) continue;
    for (const std::string& e : estimators) {
      const auto it = t.values.find(e);
      if (it == t.values.end()) {
        throw Error("trial result is missing estimator " + e);
      }
      s.values[e].push_back(it->second);
    }
    ++s.used;
  }
  if (s.used < 2) throw DataError("fewer than 2 usable trials");
  return s;
}

std::vector<MetricsRow> aggregate_all(const ExperimentConfig& cfg,
                                      const SeriesSet& series, double truth,
                                      const std::string& sweep_param,
                                      double sweep_value) {
  std::vector<MetricsRow> rows;
  int idx = 0;
  for (const std::string& e : cfg.estimators) {
    MetricsRow row =
        aggregate(e, series.values.at(e), truth, cfg.bootstrap_resamples,
                  derive_seed(cfg.seed, (2ull << 32) + static_cast<std::uint64_t>(idx++)));
    row.sweep_param = sweep_param;
    row.sweep_value = sweep_value;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, std::vector<double>> squared_errors_of(
    const SeriesSet& series, double truth) {
  std::map<std::string, std::vector<double>> sq;
  for (const auto& [name, vals] : series.values) {
    std::vector<double>& out = sq[name];
    out.reserve(vals.size());
    for (double v : vals) out.push_back((v - truth) * (v - truth));
  }
  return sq;
}

void write_meta(const ExperimentConfig& cfg, double truth,
                const std::string& note, const std::string& out_dir) {
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg.to_json());
  meta["ground_truth"] = truth;
  if (!note.empty()) meta["behavior_note"] = note;
  write_file(out_dir + "/run_meta.json", meta.dump(2) + "\n");
}

void write_trials_csv(const SeriesSet& series,
                      const std::vector<std::string>& order, double truth,
                      const std::string& path) {
  std::ostringstream os;
  os << "estimator,trial,value,squared_error\n";
  for (const std::string& e : order) {
    const auto it = series.values.find(e);
    if (it == series.values.end()) continue;
    for (std::size_t t = 0; t < it->second.size(); ++t) {
      const double v = it->second[t];
      os << e << ',' << t << ',' << fmt17(v) << ','
         << fmt17((v - truth) * (v - truth)) << '\n';
    }
  }
  write_file(path, os.str());
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path) {
  std::ostringstream os;
  os << "estimator,sweep_param,sweep_value,mse,bias_sq,variance,ci_low,"
        "ci_high,trials\n";
  for (const MetricsRow& r : rows) {
    os << r.estimator << ',' << r.sweep_param << ',' << fmt17(r.sweep_value)
       << ',' << fmt17(r.mse) << ',' << fmt17(r.bias_sq) << ','
       << fmt17(r.variance) << ',' << fmt17(r.ci_low) << ','
       << fmt17(r.ci_high) << ',' << r.trials << '\n';
  }
  write_file(path, os.str());
}

void write_cdf_csv(const std::vector<CdfTable>& tables,
                   const std::string& path) {
  std::ostringstream os;
  os << "estimator,ratio,cdf\n";
  for (const CdfTable& t : tables) {
    const std::size_t n = t.ratios.size();
    for (std::size_t i = 0; i < n; ++i) {
      os << t.estimator << ',' << fmt17(t.ratios[i]) << ','
         << fmt17(static_cast<double>(i + 1) / static_cast<double>(n)) << '\n';
    }
  }
  write_file(path, os.str());
}

void emit_outputs(const std::vector<MetricsRow>& rows,
                  const std::vector<CdfTable>& cdfs,
                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_metrics_csv(rows, out_dir + "/metrics.csv");
  if (!rows.empty()) {
    const bool swept = rows.front().sweep_param != "none";
    if (swept) {
      const std::string& param = rows.front().sweep_param;
      write_file(out_dir + "/sweep_" + param + ".svg",
                 svg::sweep_lines(rows, param, param == "n"));
    } else {
      write_file(out_dir + "/metrics.svg", svg::metric_bars(rows));
    }
  }
  if (!cdfs.empty()) {
    write_cdf_csv(cdfs, out_dir + "/cdf.csv");
    write_file(out_dir + "/cdf.svg", svg::cdf_steps(cdfs));
  }
}

void run_synth(const ExperimentConfig& cfg, const std::string& out_dir,
               std::ostream* log) {
  cfg.validate();
  fs::create_directories(out_dir);

  const synthetic::SyntheticEnv env(cfg.context_dim, cfg.num_actions,
                                    cfg.reward_std, cfg.seed);
  const EpsilonGreedyPolicy pi = epsilon_greedy_policy(
      env.mean_reward_fn(), cfg.epsilon, cfg.num_actions);
  const synthetic::GroundTruth truth = synthetic::true_value(
      env, pi, cfg.mc_contexts, derive_seed(cfg.seed, 1ull << 32),
      cfg.threads);

  const std::vector<TrialResult> trials = run_trials(cfg, cfg.trials, log);
  const SeriesSet series = collect(trials, cfg.estimators);
  const std::vector<MetricsRow> rows =
      aggregate_all(cfg, series, truth.value, "none", 0.0);

  std::vector<CdfTable> cdfs;
  if (std::find(cfg.estimators.begin(), cfg.estimators.end(), kIps) !=
          cfg.estimators.end() &&
      cfg.estimators.size() > 1) {
    cdfs = relative_error_cdf(cfg.estimators,
                              squared_errors_of(series, truth.value), kIps,
                              log);
  }
  emit_outputs(rows, cdfs, out_dir);
  write_trials_csv(series, cfg.estimators, truth.value,
                   out_dir + "/trials.csv");
  write_meta(cfg, truth.value, "behavior propensities from the logging policy",
             out_dir);
}

void run_sweep(const ExperimentConfig& base, const std::string& param,
               const std::vector<double>& values, const std::string& out_dir,
               std::ostream* log) {
  ExperimentConfig cfg = base;
  cfg.sweep_param = param;
  cfg.sweep_values = values;
  cfg.validate();
  fs::create_directories(out_dir);

  const int trials = param == "n" ? cfg.sweep_trials_n : cfg.sweep_trials_other;
  std::vector<MetricsRow> all_rows;
  std::optional<double> cached_truth;  // v(pi) is free of n and reward_std

  for (double value : values) {
    ExperimentConfig point = cfg;
    if (param == "n") {
      point.n = static_cast<int>(value);
      if (static_cast<double>(point.n) != value) {
        throw ConfigError("n sweep values must be integers");
      }
    } else if (param == "num_actions") {
      point.num_actions = static_cast<int>(value);
      if (static_cast<double>(point.num_actions) != value) {
        throw ConfigError("num_actions sweep values must be integers");
      }
    } else if (param == "epsilon") {
      point.epsilon = value;
    } else if (param == "reward_std") {
      point.reward_std = value;
    }
    point.trials = trials;
    point.validate();

    double truth;
    if ((param == "n" || param == "reward_std") && cached_truth) {
      truth = *cached_truth;
    } else {
      const synthetic::SyntheticEnv env(point.context_dim, point.num_actions,
                                        point.reward_std, point.seed);
      const EpsilonGreedyPolicy pi = epsilon_greedy_policy(
          env.mean_reward_fn(), point.epsilon, point.num_actions);
      truth = synthetic::true_value(env, pi, point.mc_contexts,
                                    derive_seed(point.seed, 1ull << 32),
                                    point.threads)
                  .value;
      cached_truth = truth;
    }

    if (log != nullptr) {
      *log << "sweep " << param << " = " << value << " (" << trials
           << " trials, truth " << truth << ")\n";
    }
    const std::vector<TrialResult> results = run_trials(point, trials, log);
    const SeriesSet series = collect(results, point.estimators);
    std::vector<MetricsRow> rows =
        aggregate_all(point, series, truth, param, value);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }
  emit_outputs(all_rows, {}, out_dir);
  write_meta(cfg, cached_truth.value_or(0.0),
             "per-point ground truth; see metrics.csv", out_dir);
}

namespace {

Dataset subsample(const Dataset& full, const estimators::ActionProbs& probs,
                  int n, RngSeed seed, estimators::ActionProbs* probs_out) {
  const int total = full.size();
  std::vector<int> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  const int take = std::min(n, total);
  for (int t = 0; t < take; ++t) {
    const int j = t + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(total - t)));
    std::swap(idx[static_cast<std::size_t>(t)],
              idx[static_cast<std::size_t>(j)]);
  }
  Dataset out;
  out.context_dim = full.context_dim;
  out.num_actions = full.num_actions;
  out.samples.reserve(static_cast<std::size_t>(take));
  probs_out->n = take;
  probs_out->K = probs.K;
  probs_out->p.clear();
  probs_out->p.reserve(static_cast<std::size_t>(take) * probs.K);
  for (int t = 0; t < take; ++t) {
    const int i = idx[static_cast<std::size_t>(t)];
    out.samples.push_back(full.samples[static_cast<std::size_t>(i)]);
    const auto row = probs.row(i);
    probs_out->p.insert(probs_out->p.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace

void run_obd(const ExperimentConfig& cfg, const std::string& out_dir,
             std::ostream* log) {
  cfg.validate();
  const ObdConfig& oc = cfg.obd;
  if (oc.data_path.empty()) throw ConfigError("obd.data_path is required");
  if (oc.target_probs_path.empty()) {
    throw ConfigError("obd.target_probs_path is required");
  }
  const obd::ColumnMapping mapping =
      oc.mapping_path.empty() ? obd::default_obd_mapping()
                              : obd::ColumnMapping::from_json_file(
                                    oc.mapping_path);

  const Dataset full = obd::load_csv(oc.data_path, mapping, oc.max_rows);
  const estimators::ActionProbs target_probs =
      obd::load_action_probs_csv(oc.target_probs_path, full.num_actions);
  if (target_probs.n != full.size()) {
    throw DataError("target probability rows (" +
                    std::to_string(target_probs.n) +
                    ") do not match data rows (" +
                    std::to_string(full.size()) + ")");
  }

  double truth;
  if (oc.ground_truth) {
    truth = *oc.ground_truth;
  } else if (!oc.target_log_path.empty()) {
    const Dataset on_policy =
        obd::load_csv(oc.target_log_path, mapping, oc.max_rows);
    double sum = 0.0;
    for (const LoggedSample& s : on_policy.samples) sum += s.reward;
    truth = sum / on_policy.size();
  } else {
    throw ConfigError(
        "either obd.ground_truth or obd.target_log_path is required");
  }

  const UniformPolicy mu = uniform_policy(full.num_actions);

  std::vector<TrialResult> runs(static_cast<std::size_t>(oc.runs));
  for (int r = 0; r < oc.runs; ++r) {
    const RngSeed run_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    TrialResult& result = runs[static_cast<std::size_t>(r)];
    try {
      estimators::ActionProbs pi;
      const Dataset data = subsample(full, target_probs, oc.n,
                                     derive_seed(run_seed, 0x5a3), &pi);
      const estimators::ActionProbs mu_probs =
          estimators::ActionProbs::behavior(mu, data);

      if (std::find(cfg.estimators.begin(), cfg.estimators.end(), kIps) !=
          cfg.estimators.end()) {
        result.values[kIps] = estimators::ips_estimate(data, pi).value;
      }
      const bool wants_dm = std::find(cfg.estimators.begin(),
                                      cfg.estimators.end(),
                                      kDm) != cfg.estimators.end();
      const bool wants_cael = std::find(cfg.estimators.begin(),
                                        cfg.estimators.end(),
                                        kCaelMips) != cfg.estimators.end();
      if (wants_cael || (wants_dm && !cfg.dm_independent_head)) {
        models::TrainConfig tc = cfg.train;
        tc.seed = derive_seed(run_seed, 0xCAE1);
        const models::TrainedModels cael =
            models::train_embeddings(data, pi, mu_probs, tc);
        if (wants_cael) {
          result.values[kCaelMips] =
              models::cael_mips_estimate(data, pi, mu_probs, cael.net,
                                         cael.posterior)
                  .value;
        }
        if (wants_dm && !cfg.dm_independent_head) {
          std::vector<ContextVector> contexts;
          contexts.reserve(data.samples.size());
          for (const LoggedSample& s : data.samples) {
            contexts.push_back(s.context);
          }
          const estimators::ActionProbs q_hat = models::predict_reward_matrix(
              cael.net, contexts, data.num_actions);
          result.values[kDm] = estimators::dm_estimate(pi, q_hat).value;
        }
      }
      if (std::find(cfg.estimators.begin(), cfg.estimators.end(), kAelMips) !=
          cfg.estimators.end()) {
        models::TrainConfig tc = cfg.train;
        tc.rho = 0.0;
        tc.gamma = 0.0;
        tc.seed = derive_seed(run_seed, 0xAE1);
        const models::TrainedModels ael =
            models::train_embeddings(data, pi, mu_probs, tc);
        result.values[kAelMips] =
            models::cael_mips_estimate(data, pi, mu_probs, ael.net,
                                       ael.posterior)
                .value;
      }
      if (wants_dm && cfg.dm_independent_head) {
        models::TrainConfig tc = cfg.train;
        tc.rho = 0.0;
        tc.gamma = 0.0;
        tc.seed = derive_seed(run_seed, 0xD0);
        const models::TrainedModels head =
            models::train_embeddings(data, pi, mu_probs, tc);
        std::vector<ContextVector> contexts;
        contexts.reserve(data.samples.size());
        for (const LoggedSample& s : data.samples) {
          contexts.push_back(s.context);
        }
        const estimators::ActionProbs q_hat = models::predict_reward_matrix(
            head.net, contexts, data.num_actions);
        result.values[kDm] = estimators::dm_estimate(pi, q_hat).value;
      }
    } catch (const TrainingDiverged& e) {
      result.failed = true;
      result.error = e.what();
    }
    if (log != nullptr && result.failed) {
      *log << "warning: run " << r << " failed: " << result.error << "\n";
    }
  }

  const SeriesSet series = collect(runs, cfg.estimators);
  const std::vector<MetricsRow> rows =
      aggregate_all(cfg, series, truth, "none", 0.0);
  std::vector<CdfTable> cdfs = relative_error_cdf(
      cfg.estimators, squared_errors_of(series, truth), kIps, log);
  emit_outputs(rows, cdfs, out_dir);
  write_trials_csv(series, cfg.estimators, truth, out_dir + "/trials.csv");
  write_meta(cfg, truth,
             "behavior assumed uniform; logged propensities used for sampled "
             "actions",
             out_dir);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void run_report(const std::string& dir, std::ostream& out) {
  const std::string metrics_path = dir + "/metrics.csv";
  std::ifstream is(metrics_path);
  if (!is) throw DataError("no metrics.csv under " + dir);
  std::string line;
  std::getline(is, line);  // header
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 9) throw DataError("malformed metrics.csv row: " + line);
    MetricsRow r;
    r.estimator = f[0];
    r.sweep_param = f[1];
    r.sweep_value = std::stod(f[2]);
    r.mse = std::stod(f[3]);
    r.bias_sq = std::stod(f[4]);
    r.variance = std::stod(f[5]);
    r.ci_low = std::stod(f[6]);
    r.ci_high = std::stod(f[7]);
    r.trials = std::stoi(f[8]);
    rows.push_back(std::move(r));
  }

  std::vector<CdfTable> cdfs;
  std::ifstream cdf_is(dir + "/cdf.csv");
  if (cdf_is) {
    std::getline(cdf_is, line);
    std::map<std::string, CdfTable> by_name;
    std::vector<std::string> order;
    while (std::getline(cdf_is, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = split_csv_line(line);
      if (f.size() != 3) throw DataError("malformed cdf.csv row: " + line);
      if (!by_name.count(f[0])) {
        by_name[f[0]].estimator = f[0];
        order.push_back(f[0]);
      }
      by_name[f[0]].ratios.push_back(std::stod(f[1]));
    }
    for (const std::string& name : order) {
      cdfs.push_back(std::move(by_name[name]));
    }
  }

  emit_outputs(rows, cdfs, dir);
  out << "estimator            mse          bias^2       variance     trials\n";
  for (const MetricsRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %12.5g %12.5g %12.5g %8d",
                  r.estimator.c_str(), r.mse, r.bias_sq, r.variance, r.trials);
    out << buf;
    if (r.sweep_param != "none") {
      out << "  (" << r.sweep_param << "=" << r.sweep_value << ")";
    }
    out << "\n";
  }
  for (const CdfTable& t : cdfs) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "%-16s beats baseline in %5.1f%% of runs",
                  t.estimator.c_str(), 100.0 * t.cdf_at(1.0));
    out << buf << "\n";
  }
}

}  // namespace cael::harness
