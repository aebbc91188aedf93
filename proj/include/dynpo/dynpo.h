#ifndef DYNPO_H
#define DYNPO_H

/* C interface to the dynpo engine.
 *
 * Every fallible call returns a dynpo_status. On failure the message is
 * available from dynpo_last_error() on the same thread until the next call.
 * Strings returned as `const char*` are owned by the library.
 *
 * Functions that fill a caller buffer take (buf, cap, len): *len always
 * receives the full length without the terminator. (NULL, 0) only queries the
 * length and succeeds; otherwise cap <= *len returns DYNPO_ERR_BUFFER_TOO_SMALL
 * and writes nothing. */

#include <stddef.h>
#include <stdint.h>

#if defined(DYNPO_BUILDING)
#define DYNPO_API __attribute__((visibility("default")))
#else
#define DYNPO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dynpo_status {
  DYNPO_OK = 0,
  DYNPO_ERR_INVALID_PARAMETER = 1,
  DYNPO_ERR_PARSE = 2,
  DYNPO_ERR_IO = 3,
  DYNPO_ERR_NUMERICAL = 4,
  DYNPO_ERR_BUFFER_TOO_SMALL = 5,
  DYNPO_ERR_INTERNAL = 6
} dynpo_status;

typedef enum dynpo_objective {
  DYNPO_OBJECTIVE_DPO = 0,
  DYNPO_OBJECTIVE_DMPO = 1,
  DYNPO_OBJECTIVE_SDPO = 2,
  DYNPO_OBJECTIVE_MPPO = 3
} dynpo_objective;

typedef enum dynpo_stage {
  DYNPO_STAGE_VIOLATION = 0,
  DYNPO_STAGE_CLUSTER = 1,
  DYNPO_STAGE_DEGENERATE = 2
} dynpo_stage;

DYNPO_API const char* dynpo_version(void);
/* Stable snake_case identifier, e.g. "invalid_parameter". */
DYNPO_API const char* dynpo_status_name(dynpo_status status);
DYNPO_API const char* dynpo_last_error(void);

/* ---- run configuration ---- */

typedef struct dynpo_config dynpo_config;

DYNPO_API dynpo_status dynpo_config_create(dynpo_config** out);
DYNPO_API void dynpo_config_destroy(dynpo_config* cfg);
DYNPO_API dynpo_status dynpo_config_set(dynpo_config* cfg, const char* key, const char* value);
DYNPO_API dynpo_status dynpo_config_get(const dynpo_config* cfg, const char* key, char* buf,
                                        size_t cap, size_t* len);
/* Applies the keys of a `key = value` file on top of the current values. */
DYNPO_API dynpo_status dynpo_config_load(dynpo_config* cfg, const char* path);
DYNPO_API dynpo_status dynpo_config_save(const dynpo_config* cfg, const char* path);
DYNPO_API dynpo_status dynpo_config_validate(const dynpo_config* cfg);

DYNPO_API size_t dynpo_config_key_count(void);
DYNPO_API const char* dynpo_config_key_name(size_t index);
DYNPO_API const char* dynpo_config_key_help(size_t index);

/* ---- commands ---- */

/* Writes <out_dir>/interactions.csv and <out_dir>/manifest.txt. */
DYNPO_API dynpo_status dynpo_generate(const dynpo_config* cfg, const char* out_dir,
                                      size_t* rows);

/* Full SFT + PO run into run_dir (NULL: the config's `out`). The summary.csv
 * data row is copied to buf. buf may be NULL when cap is 0. */
DYNPO_API dynpo_status dynpo_train(const dynpo_config* cfg, const char* run_dir, char* buf,
                                   size_t cap, size_t* len);

/* grid: ksweep | ablation | topk | alpha | gamma. n_values = 0 selects the
 * grid's default values. Writes <out_dir>/sweep.csv. */
DYNPO_API dynpo_status dynpo_sweep(const dynpo_config* cfg, const char* grid,
                                   const double* values, size_t n_values, const char* out_dir,
                                   size_t jobs);

/* Per-step times: median over a run's steps, best run of the repeats. The
 * overhead is (dynamic - naive) / naive on those medians. */
typedef struct dynpo_timing_report {
  double naive_seconds;
  double dynamic_seconds;
  double overhead;
  double naive_mean_seconds;
  double dynamic_mean_seconds;
  size_t po_steps;
} dynpo_timing_report;

DYNPO_API dynpo_status dynpo_timing(const dynpo_config* cfg, const char* out_dir, size_t repeats,
                                    dynpo_timing_report* out);

typedef struct dynpo_eval_report {
  double hit_ratio_at_1;
  double reward_win_rate; /* valid when has_win_rate != 0 */
  int has_win_rate;
} dynpo_eval_report;

/* reference may be NULL, in which case no win rate is computed. */
DYNPO_API dynpo_status dynpo_eval(const dynpo_config* cfg, const char* checkpoint,
                                  const char* reference, dynpo_eval_report* out);

/* ---- trained models ---- */

typedef struct dynpo_model dynpo_model;

DYNPO_API dynpo_status dynpo_model_load(const char* path, dynpo_model** out);
DYNPO_API void dynpo_model_destroy(dynpo_model* model);
DYNPO_API size_t dynpo_model_vocab_size(const dynpo_model* model);
DYNPO_API size_t dynpo_model_dim(const dynpo_model* model);
DYNPO_API dynpo_status dynpo_model_log_prob(const dynpo_model* model, const uint32_t* history,
                                            size_t history_len, uint32_t item, double* out);

/* ---- per-instance math ---- */

typedef struct dynpo_record {
  double pos_theta;
  double pos_ref;
  const double* neg_theta; /* length k */
  const double* neg_ref;   /* length k */
  size_t k;
} dynpo_record;

/* betas[j] belongs to negative active[j]. grad_neg receives k values, zero
 * outside the active set. */
DYNPO_API dynpo_status dynpo_loss(dynpo_objective objective, const dynpo_record* record,
                                  const double* betas, const size_t* active, size_t n_active,
                                  double* value, double* grad_pos, double* grad_neg);

/* boundary needs room for k indices; they are written ascending. */
DYNPO_API dynpo_status dynpo_select_boundary(const dynpo_record* record, size_t* boundary,
                                             size_t* n_boundary, dynpo_stage* stage);

DYNPO_API dynpo_status dynpo_dynamic_beta(const dynpo_record* record, const size_t* boundary,
                                          size_t n_boundary, size_t b_index, double beta0,
                                          double alpha, double gamma, double* beta);

/* assignments: n entries (cluster 0 lowest); centroids: k entries. */
DYNPO_API dynpo_status dynpo_kmeans_1d(const double* values, size_t n, size_t k,
                                       size_t* assignments, double* centroids, double* wcss);

#ifdef __cplusplus
}
#endif

#endif /* DYNPO_H */
