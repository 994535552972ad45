// Command-line front end. Talks to the library exclusively through the
// C API in caelmips.h.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caelmips.h"

namespace {

constexpr size_t kErrLen = 1024;

struct ConfigHandle {
  cael_config* cfg = nullptr;
  ~ConfigHandle() { cael_config_free(cfg); }
};

// Builds the config from --config and --set overrides; returns an exit code
// (0 on success).
int build_config(ConfigHandle& handle, const std::string& config_path,
                 const std::vector<std::string>& overrides, char* errbuf) {
  if (config_path.empty()) {
    handle.cfg = cael_config_create();
    if (handle.cfg == nullptr) {
      std::fprintf(stderr, "error: out of memory\n");
      return CAEL_ERR_INTERNAL;
    }
  } else {
    handle.cfg = cael_config_load(config_path.c_str(), errbuf, kErrLen);
    if (handle.cfg == nullptr) {
      std::fprintf(stderr, "error: %s\n", errbuf);
      return CAEL_ERR_CONFIG;
    }
  }
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                   kv.c_str());
      return CAEL_ERR_CONFIG;
    }
    const int rc = cael_config_set(handle.cfg, kv.substr(0, eq).c_str(),
                                   kv.substr(eq + 1).c_str(), errbuf, kErrLen);
    if (rc != CAEL_OK) {
      std::fprintf(stderr, "error: %s\n", errbuf);
      return rc;
    }
  }
  return CAEL_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy evaluation experiments for finite-action "
               "contextual bandits"};
  app.require_subcommand(1);
  app.fallthrough(true);  // allow global flags after the subcommand

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON config file");
  app.add_option("--set", overrides,
                 "config override as dotted key=value (repeatable)");

  auto* verify = app.add_subcommand(
      "verify", "run the exact-oracle identity suite");
  int verify_instances = 0;
  verify->add_option("--instances", verify_instances,
                     "number of random instances (default from config)");

  auto* synth = app.add_subcommand("synth", "single synthetic experiment");
  std::string out_dir = "out";
  synth->add_option("-o,--out", out_dir, "output directory");
  int trials = 0;
  synth->add_option("--trials", trials, "trial count override");
  unsigned long long seed = 0;
  bool seed_set = false;
  synth->add_option_function<unsigned long long>(
      "--seed", [&](unsigned long long v) { seed = v; seed_set = true; },
      "seed override");

  auto* sweep = app.add_subcommand("sweep", "sweep one problem parameter");
  std::string sweep_param;
  std::vector<double> sweep_values;
  std::string sweep_out = "out";
  sweep->add_option("--param", sweep_param,
                    "n | num_actions | epsilon | reward_std")
      ->required();
  sweep->add_option("--values", sweep_values, "grid values")
      ->required()
      ->delimiter(',');
  sweep->add_option("-o,--out", sweep_out, "output directory");

  auto* obd = app.add_subcommand("obd", "run on real logged data");
  std::string obd_data, obd_mapping, obd_probs, obd_out = "out";
  obd->add_option("--data", obd_data, "logged data CSV")->required();
  obd->add_option("--mapping", obd_mapping, "column mapping JSON");
  obd->add_option("--target-probs", obd_probs,
                  "per-row target action probability CSV")
      ->required();
  obd->add_option("-o,--out", obd_out, "output directory");

  auto* report = app.add_subcommand("report",
                                    "re-render charts from an output dir");
  std::string report_dir;
  report->add_option("dir", report_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  char errbuf[kErrLen] = {0};

  if (report->parsed()) {
    const int rc = cael_run_report(report_dir.c_str(), errbuf, kErrLen);
    if (rc != CAEL_OK) std::fprintf(stderr, "error: %s\n", errbuf);
    return rc;
  }

  ConfigHandle handle;
  if (const int rc = build_config(handle, config_path, overrides, errbuf);
      rc != CAEL_OK) {
    return rc;
  }

  int rc = CAEL_OK;
  if (verify->parsed()) {
    if (verify_instances > 0) {
      rc = cael_config_set(handle.cfg, "verify_instances",
                           std::to_string(verify_instances).c_str(), errbuf,
                           kErrLen);
    }
    if (rc == CAEL_OK) rc = cael_run_verify(handle.cfg, errbuf, kErrLen);
  } else if (synth->parsed()) {
    if (trials > 0) {
      rc = cael_config_set(handle.cfg, "trials",
                           std::to_string(trials).c_str(), errbuf, kErrLen);
    }
    if (rc == CAEL_OK && seed_set) {
      rc = cael_config_set(handle.cfg, "seed", std::to_string(seed).c_str(),
                           errbuf, kErrLen);
    }
    if (rc == CAEL_OK) {
      rc = cael_run_synth(handle.cfg, out_dir.c_str(), errbuf, kErrLen);
    }
  } else if (sweep->parsed()) {
    rc = cael_run_sweep(handle.cfg, sweep_param.c_str(), sweep_values.data(),
                        sweep_values.size(), sweep_out.c_str(), errbuf,
                        kErrLen);
  } else if (obd->parsed()) {
    rc = cael_run_obd(handle.cfg, obd_data.c_str(),
                      obd_mapping.empty() ? nullptr : obd_mapping.c_str(),
                      obd_probs.c_str(), obd_out.c_str(), errbuf, kErrLen);
  }

  if (rc != CAEL_OK && errbuf[0] != '\0') {
    std::fprintf(stderr, "error: %s\n", errbuf);
  }
  return rc;
}
