#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cael/harness.hpp"

namespace cael::harness {

namespace {

using nlohmann::json;

void read_train(const json& j, models::TrainConfig& t) {
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.iterations = j.value("iterations", t.iterations);
  t.rho = j.value("rho", t.rho);
  t.gamma = j.value("gamma", t.gamma);
  t.posterior_refit_epochs =
      j.value("posterior_refit_epochs", t.posterior_refit_epochs);
  t.posterior_final_epochs =
      j.value("posterior_final_epochs", t.posterior_final_epochs);
  t.posterior_lr = j.value("posterior_lr", t.posterior_lr);
  t.posterior_l2 = j.value("posterior_l2", t.posterior_l2);
  t.hidden_width = j.value("hidden_width", t.hidden_width);
  t.dropout = j.value("dropout", t.dropout);
  t.var_loss_uses_predicted_reward = j.value(
      "var_loss_uses_predicted_reward", t.var_loss_uses_predicted_reward);
}

json train_to_json(const models::TrainConfig& t) {
  return json{{"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"iterations", t.iterations},
              {"rho", t.rho},
              {"gamma", t.gamma},
              {"posterior_refit_epochs", t.posterior_refit_epochs},
              {"posterior_final_epochs", t.posterior_final_epochs},
              {"posterior_lr", t.posterior_lr},
              {"posterior_l2", t.posterior_l2},
              {"hidden_width", t.hidden_width},
              {"dropout", t.dropout},
              {"var_loss_uses_predicted_reward",
               t.var_loss_uses_predicted_reward}};
}

void read_obd(const json& j, ObdConfig& o) {
  o.data_path = j.value("data_path", o.data_path);
  o.mapping_path = j.value("mapping_path", o.mapping_path);
  o.target_probs_path = j.value("target_probs_path", o.target_probs_path);
  o.target_log_path = j.value("target_log_path", o.target_log_path);
  if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
    o.ground_truth = j.at("ground_truth").get<double>();
  }
  if (j.contains("max_rows") && !j.at("max_rows").is_null()) {
    o.max_rows = j.at("max_rows").get<long>();
  }
  o.n = j.value("n", o.n);
  o.runs = j.value("runs", o.runs);
}

json obd_to_json(const ObdConfig& o) {
  json j{{"data_path", o.data_path},
         {"mapping_path", o.mapping_path},
         {"target_probs_path", o.target_probs_path},
         {"target_log_path", o.target_log_path},
         {"n", o.n},
         {"runs", o.runs}};
  if (o.ground_truth) j["ground_truth"] = *o.ground_truth;
  if (o.max_rows) j["max_rows"] = *o.max_rows;
  return j;
}

void read_config(const json& j, ExperimentConfig& c) {
  c.context_dim = j.value("context_dim", c.context_dim);
  c.num_actions = j.value("num_actions", c.num_actions);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.reward_std = j.value("reward_std", c.reward_std);
  c.n = j.value("n", c.n);
  c.trials = j.value("trials", c.trials);
  if (j.contains("estimators")) {
    c.estimators = j.at("estimators").get<std::vector<std::string>>();
  }
  if (j.contains("train")) read_train(j.at("train"), c.train);
  c.mc_contexts = j.value("mc_contexts", c.mc_contexts);
  c.seed = j.value("seed", c.seed);
  c.sweep_param = j.value("sweep_param", c.sweep_param);
  if (j.contains("sweep_values")) {
    c.sweep_values = j.at("sweep_values").get<std::vector<double>>();
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  c.threads = j.value("threads", c.threads);
  c.dm_independent_head =
      j.value("dm_independent_head", c.dm_independent_head);
  c.sweep_trials_n = j.value("sweep_trials_n", c.sweep_trials_n);
  c.sweep_trials_other = j.value("sweep_trials_other", c.sweep_trials_other);
  c.verify_instances = j.value("verify_instances", c.verify_instances);
  c.bootstrap_resamples =
      j.value("bootstrap_resamples", c.bootstrap_resamples);
  if (j.contains("obd")) read_obd(j.at("obd"), c.obd);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (context_dim < 1) throw ConfigError("context_dim must be positive");
  if (num_actions < 1) throw ConfigError("num_actions must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("epsilon outside [0, 1]");
  }
  if (!(reward_std >= 0.0)) throw ConfigError("reward_std must be >= 0");
  if (n < 1) throw ConfigError("n must be positive");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (estimators.empty()) throw ConfigError("estimator list is empty");
  for (const std::string& e : estimators) {
    if (e != kIps && e != kDm && e != kAelMips && e != kCaelMips) {
      throw ConfigError("unknown estimator '" + e + "'");
    }
  }
  if (!sweep_param.empty()) {
    if (sweep_param != "n" && sweep_param != "num_actions" &&
        sweep_param != "epsilon" && sweep_param != "reward_std") {
      throw ConfigError("unknown sweep parameter '" + sweep_param + "'");
    }
    if (sweep_values.empty()) {
      throw ConfigError("sweep_values must be non-empty when sweeping");
    }
  }
  if (mc_contexts < 1) throw ConfigError("mc_contexts must be positive");
  if (verify_instances < 1) throw ConfigError("verify_instances >= 1");
  if (bootstrap_resamples < 1) throw ConfigError("bootstrap_resamples >= 1");
  try {
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  ExperimentConfig c;
  try {
    read_config(j, c);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return from_json(buf.str());
}

void ExperimentConfig::apply_override(const std::string& dotted_key,
                                      const std::string& value) {
  // Build a nested JSON object from the dotted path, then merge.
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // bare string
  json patch;
  json* cursor = &patch;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad override key: " + dotted_key);
    if (dot == std::string::npos) {
      (*cursor)[part] = parsed;
      break;
    }
    cursor = &(*cursor)[part];
    start = dot + 1;
  }
  ExperimentConfig updated = *this;
  try {
    read_config(patch, updated);
  } catch (const json::exception& e) {
    throw ConfigError("bad override '" + dotted_key + "': " + e.what());
  }
  updated.validate();  // reject before committing
  *this = std::move(updated);
}

std::string ExperimentConfig::to_json() const {
  json j{{"context_dim", context_dim},
         {"num_actions", num_actions},
         {"epsilon", epsilon},
         {"reward_std", reward_std},
         {"n", n},
         {"trials", trials},
         {"estimators", estimators},
         {"train", train_to_json(train)},
         {"mc_contexts", mc_contexts},
         {"seed", seed},
         {"sweep_param", sweep_param},
         {"sweep_values", sweep_values},
         {"out_dir", out_dir},
         {"threads", threads},
         {"dm_independent_head", dm_independent_head},
         {"sweep_trials_n", sweep_trials_n},
         {"sweep_trials_other", sweep_trials_other},
         {"verify_instances", verify_instances},
         {"bootstrap_resamples", bootstrap_resamples},
         {"obd", obd_to_json(obd)}};
  return j.dump(2);
}

}  // namespace cael::harness
