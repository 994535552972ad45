#include "caelmips.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include "cael/estimators.hpp"
#include "cael/harness.hpp"
#include "cael/obd.hpp"
#include "cael/synthetic.hpp"

using cael::harness::ExperimentConfig;

struct cael_config {
  ExperimentConfig cfg;
};

struct cael_dataset {
  cael::Dataset data;
};

namespace {

void fill_error(char* errbuf, size_t errlen, const char* what) {
  if (errbuf == nullptr || errlen == 0) return;
  std::strncpy(errbuf, what, errlen - 1);
  errbuf[errlen - 1] = '\0';
}

// Maps the library exception hierarchy onto the C error codes.
template <typename Fn>
int guarded(char* errbuf, size_t errlen, Fn&& fn) {
  try {
    return fn();
  } catch (const cael::ConfigError& e) {
    fill_error(errbuf, errlen, e.what());
    return CAEL_ERR_CONFIG;
  } catch (const cael::InvalidArgument& e) {
    fill_error(errbuf, errlen, e.what());
    return CAEL_ERR_CONFIG;
  } catch (const cael::DataError& e) {
    fill_error(errbuf, errlen, e.what());
    return CAEL_ERR_DATA;
  } catch (const cael::IoError& e) {
    fill_error(errbuf, errlen, e.what());
    return CAEL_ERR_DATA;
  } catch (const cael::UnsupportedAction& e) {
    fill_error(errbuf, errlen, e.what());
    return CAEL_ERR_DATA;
  } catch (const std::exception& e) {
    fill_error(errbuf, errlen, e.what());
    return CAEL_ERR_INTERNAL;
  } catch (...) {
    fill_error(errbuf, errlen, "unknown error");
    return CAEL_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* cael_version(void) { return "0.1.0"; }

cael_config* cael_config_create(void) {
  return new (std::nothrow) cael_config{};
}

cael_config* cael_config_load(const char* path, char* errbuf, size_t errlen) {
  if (path == nullptr) {
    fill_error(errbuf, errlen, "path is NULL");
    return nullptr;
  }
  cael_config* out = nullptr;
  guarded(errbuf, errlen, [&]() {
    out = new cael_config{ExperimentConfig::from_json_file(path)};
    return CAEL_OK;
  });
  return out;
}

int cael_config_set(cael_config* cfg, const char* key, const char* value,
                    char* errbuf, size_t errlen) {
  if (cfg == nullptr || key == nullptr || value == nullptr) {
    fill_error(errbuf, errlen, "NULL argument");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    cfg->cfg.apply_override(key, value);
    return CAEL_OK;
  });
}

char* cael_config_dump(const cael_config* cfg) {
  if (cfg == nullptr) return nullptr;
  const std::string j = cfg->cfg.to_json();
  char* out = static_cast<char*>(std::malloc(j.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, j.c_str(), j.size() + 1);
  return out;
}

void cael_config_free(cael_config* cfg) { delete cfg; }

void cael_string_free(char* s) { std::free(s); }

int cael_run_verify(const cael_config* cfg, char* errbuf, size_t errlen) {
  if (cfg == nullptr) {
    fill_error(errbuf, errlen, "config is NULL");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    const bool ok = cael::harness::run_verify(cfg->cfg, std::cout);
    if (!ok) fill_error(errbuf, errlen, "identity checks failed");
    return ok ? CAEL_OK : CAEL_ERR_VERIFY;
  });
}

int cael_run_synth(const cael_config* cfg, const char* out_dir, char* errbuf,
                   size_t errlen) {
  if (cfg == nullptr || out_dir == nullptr) {
    fill_error(errbuf, errlen, "NULL argument");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    cael::harness::run_synth(cfg->cfg, out_dir, &std::cerr);
    return CAEL_OK;
  });
}

int cael_run_sweep(const cael_config* cfg, const char* param,
                   const double* values, size_t num_values,
                   const char* out_dir, char* errbuf, size_t errlen) {
  if (cfg == nullptr || param == nullptr || out_dir == nullptr ||
      (values == nullptr && num_values > 0)) {
    fill_error(errbuf, errlen, "NULL argument");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    std::vector<double> vals(values, values + num_values);
    cael::harness::run_sweep(cfg->cfg, param, vals, out_dir, &std::cerr);
    return CAEL_OK;
  });
}

int cael_run_obd(const cael_config* cfg, const char* data_csv,
                 const char* mapping_json, const char* target_probs_csv,
                 const char* out_dir, char* errbuf, size_t errlen) {
  if (cfg == nullptr || out_dir == nullptr) {
    fill_error(errbuf, errlen, "NULL argument");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    ExperimentConfig local = cfg->cfg;
    if (data_csv != nullptr) local.obd.data_path = data_csv;
    if (mapping_json != nullptr) local.obd.mapping_path = mapping_json;
    if (target_probs_csv != nullptr) {
      local.obd.target_probs_path = target_probs_csv;
    }
    cael::harness::run_obd(local, out_dir, &std::cerr);
    return CAEL_OK;
  });
}

int cael_run_report(const char* dir, char* errbuf, size_t errlen) {
  if (dir == nullptr) {
    fill_error(errbuf, errlen, "dir is NULL");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    cael::harness::run_report(dir, std::cout);
    return CAEL_OK;
  });
}

cael_dataset* cael_dataset_load_csv(const char* path, const char* mapping_path,
                                    long max_rows, char* errbuf,
                                    size_t errlen) {
  if (path == nullptr) {
    fill_error(errbuf, errlen, "path is NULL");
    return nullptr;
  }
  cael_dataset* out = nullptr;
  guarded(errbuf, errlen, [&]() {
    cael::obd::ColumnMapping mapping;
    if (mapping_path != nullptr) {
      mapping = cael::obd::ColumnMapping::from_json_file(mapping_path);
    } else {
      // Infer the numeric layout's width from the header.
      std::ifstream is(path);
      if (!is) throw cael::IoError(std::string("cannot open: ") + path);
      std::string header;
      std::getline(is, header);
      int d = 0;
      while (header.find("x" + std::to_string(d)) != std::string::npos) ++d;
      if (d == 0) {
        throw cael::SchemaError(
            "cannot infer numeric layout; provide a mapping file");
      }
      mapping = cael::obd::default_numeric_mapping(d);
    }
    std::optional<long> cap;
    if (max_rows >= 0) cap = max_rows;
    out = new cael_dataset{cael::obd::load_csv(path, mapping, cap)};
    return CAEL_OK;
  });
  return out;
}

cael_dataset* cael_dataset_generate(const cael_config* cfg,
                                    unsigned long long seed, char* errbuf,
                                    size_t errlen) {
  if (cfg == nullptr) {
    fill_error(errbuf, errlen, "config is NULL");
    return nullptr;
  }
  cael_dataset* out = nullptr;
  guarded(errbuf, errlen, [&]() {
    const ExperimentConfig& c = cfg->cfg;
    c.validate();
    const cael::synthetic::SyntheticEnv env(c.context_dim, c.num_actions,
                                            c.reward_std, c.seed);
    const cael::UniformPolicy mu = cael::uniform_policy(c.num_actions);
    out = new cael_dataset{
        cael::synthetic::generate_dataset(env, mu, c.n, seed)};
    return CAEL_OK;
  });
  return out;
}

void cael_dataset_free(cael_dataset* data) { delete data; }

long cael_dataset_size(const cael_dataset* data) {
  return data == nullptr ? 0 : data->data.size();
}

int cael_dataset_context_dim(const cael_dataset* data) {
  return data == nullptr ? 0 : data->data.context_dim;
}

int cael_dataset_num_actions(const cael_dataset* data) {
  return data == nullptr ? 0 : data->data.num_actions;
}

int cael_ips_estimate(const cael_dataset* data, const double* target_probs,
                      double* out_value, char* errbuf, size_t errlen) {
  if (data == nullptr || target_probs == nullptr || out_value == nullptr) {
    fill_error(errbuf, errlen, "NULL argument");
    return CAEL_ERR_CONFIG;
  }
  return guarded(errbuf, errlen, [&]() {
    cael::estimators::ActionProbs pi;
    pi.n = data->data.size();
    pi.K = data->data.num_actions;
    pi.p.assign(target_probs,
                target_probs + static_cast<std::size_t>(pi.n) * pi.K);
    for (int i = 0; i < pi.n; ++i) cael::check_simplex(pi.row(i));
    *out_value = cael::estimators::ips_estimate(data->data, pi).value;
    return CAEL_OK;
  });
}

}  // extern "C"
