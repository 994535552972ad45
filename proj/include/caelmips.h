/* C interface to the caelmips off-policy evaluation library.
 *
 * All functions are thread-compatible: distinct handles may be used from
 * distinct threads, a single handle must not be shared without external
 * synchronization. Functions that can fail return an error code and, when
 * given, fill a caller-owned message buffer (always NUL-terminated).
 */
#ifndef CAELMIPS_H
#define CAELMIPS_H

#include <stddef.h>

#if defined(_WIN32)
#define CAEL_API __declspec(dllexport)
#else
#define CAEL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes; these double as CLI exit codes. */
enum {
  CAEL_OK = 0,
  CAEL_ERR_CONFIG = 1,   /* invalid configuration or arguments */
  CAEL_ERR_DATA = 2,     /* bad input data or IO failure */
  CAEL_ERR_VERIFY = 3,   /* an oracle identity check failed */
  CAEL_ERR_INTERNAL = 4  /* unexpected failure */
};

typedef struct cael_config cael_config;
typedef struct cael_dataset cael_dataset;

CAEL_API const char* cael_version(void);

/* --- configuration ------------------------------------------------- */

/* Fresh config with built-in defaults. Never fails. */
CAEL_API cael_config* cael_config_create(void);

/* Config from a JSON file; NULL on failure (message in errbuf). */
CAEL_API cael_config* cael_config_load(const char* path, char* errbuf,
                                       size_t errlen);

/* Applies one dotted-key override, e.g. ("train.rho", "10"). */
CAEL_API int cael_config_set(cael_config* cfg, const char* key,
                             const char* value, char* errbuf, size_t errlen);

/* Serialized JSON of the config; free with cael_string_free. */
CAEL_API char* cael_config_dump(const cael_config* cfg);

CAEL_API void cael_config_free(cael_config* cfg);
CAEL_API void cael_string_free(char* s);

/* --- experiment drivers -------------------------------------------- */

/* Runs the exact-oracle identity suite; prints one line per check to
 * stdout. Returns CAEL_OK or CAEL_ERR_VERIFY. */
CAEL_API int cael_run_verify(const cael_config* cfg, char* errbuf,
                             size_t errlen);

/* Single synthetic experiment; writes metrics.csv, cdf.csv, trials.csv,
 * charts, and run_meta.json under out_dir. */
CAEL_API int cael_run_synth(const cael_config* cfg, const char* out_dir,
                            char* errbuf, size_t errlen);

/* Sweep over one problem parameter: "n", "num_actions", "epsilon" or
 * "reward_std". */
CAEL_API int cael_run_sweep(const cael_config* cfg, const char* param,
                            const double* values, size_t num_values,
                            const char* out_dir, char* errbuf, size_t errlen);

/* Real logged data in the Open Bandit Dataset layout. Paths override the
 * config's obd section when non-NULL. */
CAEL_API int cael_run_obd(const cael_config* cfg, const char* data_csv,
                          const char* mapping_json,
                          const char* target_probs_csv, const char* out_dir,
                          char* errbuf, size_t errlen);

/* Re-renders charts and prints a summary for an existing output dir. */
CAEL_API int cael_run_report(const char* dir, char* errbuf, size_t errlen);

/* --- datasets and estimates ---------------------------------------- */

/* Loads a logged-bandit CSV with the mapping JSON at mapping_path (NULL:
 * plain numeric x0..x{d-1},action,reward,propensity layout inferred from
 * the header). max_rows < 0 means no limit. */
CAEL_API cael_dataset* cael_dataset_load_csv(const char* path,
                                             const char* mapping_path,
                                             long max_rows, char* errbuf,
                                             size_t errlen);

/* Synthetic logged dataset drawn from the config's environment. */
CAEL_API cael_dataset* cael_dataset_generate(const cael_config* cfg,
                                             unsigned long long seed,
                                             char* errbuf, size_t errlen);

CAEL_API void cael_dataset_free(cael_dataset* data);
CAEL_API long cael_dataset_size(const cael_dataset* data);
CAEL_API int cael_dataset_context_dim(const cael_dataset* data);
CAEL_API int cael_dataset_num_actions(const cael_dataset* data);

/* IPS estimate under caller-supplied target probabilities (row-major
 * n x K, rows summing to 1). */
CAEL_API int cael_ips_estimate(const cael_dataset* data,
                               const double* target_probs, double* out_value,
                               char* errbuf, size_t errlen);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CAELMIPS_H */
