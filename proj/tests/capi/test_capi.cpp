#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "caelmips.h"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::stringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

struct Cfg {
  cael_config* ptr = cael_config_create();
  ~Cfg() { cael_config_free(ptr); }
  void set(const char* k, const char* v) {
    char err[256] = {0};
    REQUIRE(cael_config_set(ptr, k, v, err, sizeof(err)) == CAEL_OK);
  }
};

void make_tiny(Cfg& cfg) {
  cfg.set("context_dim", "2");
  cfg.set("num_actions", "4");
  cfg.set("n", "60");
  cfg.set("trials", "3");
  cfg.set("mc_contexts", "5000");
  cfg.set("train.iterations", "20");
  cfg.set("train.batch_size", "32");
  cfg.set("train.hidden_width", "8");
  cfg.set("train.posterior_final_epochs", "20");
  cfg.set("bootstrap_resamples", "200");
  cfg.set("estimators", R"(["IPS","CAEL-MIPS"])");
}

}  // namespace

TEST_CASE("version string") {
  CHECK(std::string(cael_version()) == "0.1.0");
}

TEST_CASE("config lifecycle and error reporting") {
  Cfg cfg;
  REQUIRE(cfg.ptr != nullptr);
  char err[256] = {0};

  CHECK(cael_config_set(cfg.ptr, "epsilon", "0.5", err, sizeof(err)) ==
        CAEL_OK);
  CHECK(cael_config_set(cfg.ptr, "epsilon", "7", err, sizeof(err)) ==
        CAEL_ERR_CONFIG);
  CHECK(err[0] != '\0');

  char* dump = cael_config_dump(cfg.ptr);
  REQUIRE(dump != nullptr);
  CHECK(std::string(dump).find("\"epsilon\": 0.5") != std::string::npos);
  cael_string_free(dump);

  CHECK(cael_config_load("/does/not/exist.json", err, sizeof(err)) == nullptr);
  CHECK(err[0] != '\0');
}

TEST_CASE("verify through the C API") {
  Cfg cfg;
  cfg.set("verify_instances", "20");
  char err[256] = {0};
  CHECK(cael_run_verify(cfg.ptr, err, sizeof(err)) == CAEL_OK);
}

TEST_CASE("synth twice is byte identical, and report works") {
  namespace fs = std::filesystem;
  Cfg cfg;
  make_tiny(cfg);
  char err[512] = {0};
  fs::remove_all("capi_a");
  fs::remove_all("capi_b");
  REQUIRE(cael_run_synth(cfg.ptr, "capi_a", err, sizeof(err)) == CAEL_OK);
  REQUIRE(cael_run_synth(cfg.ptr, "capi_b", err, sizeof(err)) == CAEL_OK);
  CHECK(read_file("capi_a/metrics.csv") == read_file("capi_b/metrics.csv"));

  CHECK(cael_run_report("capi_a", err, sizeof(err)) == CAEL_OK);
  CHECK(cael_run_report("/no/such/dir", err, sizeof(err)) == CAEL_ERR_DATA);
  fs::remove_all("capi_a");
  fs::remove_all("capi_b");
}

TEST_CASE("sweep through the C API") {
  namespace fs = std::filesystem;
  Cfg cfg;
  make_tiny(cfg);
  cfg.set("estimators", R"(["IPS"])");
  cfg.set("sweep_trials_other", "3");
  const double values[2] = {0.2, 1.0};
  char err[512] = {0};
  fs::remove_all("capi_sweep");
  REQUIRE(cael_run_sweep(cfg.ptr, "epsilon", values, 2, "capi_sweep", err,
                         sizeof(err)) == CAEL_OK);
  CHECK(fs::exists("capi_sweep/metrics.csv"));
  CHECK(cael_run_sweep(cfg.ptr, "bogus", values, 2, "capi_sweep", err,
                       sizeof(err)) == CAEL_ERR_CONFIG);
  fs::remove_all("capi_sweep");
}

TEST_CASE("datasets and ips through the C API") {
  Cfg cfg;
  make_tiny(cfg);
  char err[512] = {0};
  cael_dataset* data = cael_dataset_generate(cfg.ptr, 123, err, sizeof(err));
  REQUIRE(data != nullptr);
  CHECK(cael_dataset_size(data) == 60);
  CHECK(cael_dataset_context_dim(data) == 2);
  CHECK(cael_dataset_num_actions(data) == 4);

  // Uniform target over 4 actions: the IPS estimate equals the mean reward.
  std::vector<double> probs(60 * 4, 0.25);
  double value = 0.0;
  REQUIRE(cael_ips_estimate(data, probs.data(), &value, err, sizeof(err)) ==
          CAEL_OK);
  CHECK(value == value);  // finite
  cael_dataset_free(data);

  // CSV load path: write a numeric-layout file through the library once.
  {
    std::ofstream os("capi_data.csv");
    os << "x0,x1,action,reward,propensity\n";
    os << "0.1,0.2,0,1.0,0.5\n0.3,0.4,1,0.0,0.5\n";
  }
  cael_dataset* loaded =
      cael_dataset_load_csv("capi_data.csv", nullptr, -1, err, sizeof(err));
  REQUIRE(loaded != nullptr);
  CHECK(cael_dataset_size(loaded) == 2);
  CHECK(cael_dataset_context_dim(loaded) == 2);
  cael_dataset_free(loaded);
  std::remove("capi_data.csv");

  CHECK(cael_dataset_load_csv("/no/file.csv", nullptr, -1, err,
                              sizeof(err)) == nullptr);
  CHECK(err[0] != '\0');
}
