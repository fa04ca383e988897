/* C interface to the doppel library. All handles are opaque; every call
 * returns a dp_status and, on failure, leaves a message retrievable with
 * dp_last_error() on the calling thread. Strings returned through char**
 * out-parameters are owned by the caller and released with dp_string_free. */
#ifndef DOPPEL_DOPPEL_H
#define DOPPEL_DOPPEL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DOPPEL_BUILDING_LIBRARY)
#    define DOPPEL_API __declspec(dllexport)
#  else
#    define DOPPEL_API __declspec(dllimport)
#  endif
#else
#  define DOPPEL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dp_status {
  DP_OK = 0,
  DP_ERR_INPUT = 1,
  DP_ERR_DIMENSION = 2,
  DP_ERR_STATE = 3,
  DP_ERR_LOOKUP = 4,
  DP_ERR_CONFLICT = 5,
  DP_ERR_UNSUPPORTED_MAP = 6,
  DP_ERR_NUMERIC = 7,
  DP_ERR_CONFIG = 8,
  DP_ERR_PARSE = 9,
  DP_ERR_EXPORT = 10,
  DP_ERR_EVALUATION = 11,
  DP_ERR_SEARCH = 12,
  DP_ERR_IO = 13,
  DP_ERR_INTERNAL = 14
} dp_status;

typedef struct dp_dataset dp_dataset;
typedef struct dp_primal dp_primal;
typedef struct dp_model dp_model;

DOPPEL_API const char* dp_version(void);
DOPPEL_API const char* dp_status_name(dp_status status);
/* Message of the last failed call on this thread ("" if none). */
DOPPEL_API const char* dp_last_error(void);
DOPPEL_API void dp_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

/* "iris" or "diabetes". */
DOPPEL_API dp_status dp_dataset_builtin(const char* name, dp_dataset** out);
/* task: "classification" or "regression". */
DOPPEL_API dp_status dp_dataset_load_csv(const char* path, const char* target_column, const char* task,
                                         dp_dataset** out);
/* X is row-major rows x cols. Classification labels must be 0..K-1. */
DOPPEL_API dp_status dp_dataset_from_arrays(const double* X, size_t rows, size_t cols, const double* y,
                                            const char* task, dp_dataset** out);
DOPPEL_API dp_status dp_dataset_shape(const dp_dataset* ds, size_t* rows, size_t* cols, size_t* classes);
DOPPEL_API dp_status dp_dataset_features(const dp_dataset* ds, double* out, size_t capacity);
DOPPEL_API dp_status dp_dataset_targets(const dp_dataset* ds, double* out, size_t capacity);
/* Standardizes the features in place; the statistics travel with models
 * fitted on this dataset or on its splits. */
DOPPEL_API dp_status dp_dataset_standardize(dp_dataset* ds);
DOPPEL_API dp_status dp_dataset_split(const dp_dataset* ds, double test_size, uint64_t seed, dp_dataset** train,
                                      dp_dataset** test);
DOPPEL_API void dp_dataset_free(dp_dataset* ds);

/* ---- classical models --------------------------------------------------- */

/* family: linear, ridge, lasso, elasticnet, logistic, linear_svc,
 * decision_tree (estimator class names are accepted too). hyperparams_json
 * may be NULL, e.g. {"alpha": 0.5}. */
DOPPEL_API dp_status dp_primal_new(const char* family, const char* hyperparams_json, dp_primal** out);
DOPPEL_API dp_status dp_primal_fit(dp_primal* model, const dp_dataset* train);
DOPPEL_API dp_status dp_primal_score(const dp_primal* model, const dp_dataset* ds, double* out);
/* Predicts on unscaled rows; stored standardization is applied first. */
DOPPEL_API dp_status dp_primal_predict(const dp_primal* model, const double* X, size_t rows, size_t cols,
                                       double* out);
DOPPEL_API dp_status dp_primal_family(const dp_primal* model, const char** out);
DOPPEL_API dp_status dp_primal_save(const dp_primal* model, const char* path);
DOPPEL_API dp_status dp_primal_load(const char* path, dp_primal** out);
DOPPEL_API void dp_primal_free(dp_primal* model);

/* ---- doped models -------------------------------------------------------- */

/* strategy: NULL (default), "exact", "approximate" or "universal".
 * train_json may be NULL or hold any of optimizer, learning_rate, epochs,
 * batch_size, seed, validation_fraction, hidden_layers (list). */
DOPPEL_API dp_status dp_dope(const dp_primal* primal, const char* strategy, const char* train_json,
                             dp_model** out);
/* params_json: NULL or a grid such as {"optimizer": {"grid_search": ["adam", "nadam"]}}. */
DOPPEL_API dp_status dp_model_fit(dp_model* model, const dp_dataset* train, const char* params_json);
/* out[0] = loss, out[1] = accuracy or r2. */
DOPPEL_API dp_status dp_model_score(const dp_model* model, const dp_dataset* ds, double out[2]);
DOPPEL_API dp_status dp_model_predict(const dp_model* model, const double* X, size_t rows, size_t cols,
                                      double* out);
DOPPEL_API dp_status dp_model_predict_dataset(const dp_model* model, const dp_dataset* ds, double* out,
                                              size_t capacity);
DOPPEL_API dp_status dp_model_is_fitted(const dp_model* model, int* out);
DOPPEL_API dp_status dp_model_is_classifier(const dp_model* model, int* out);
DOPPEL_API dp_status dp_model_strategy(const dp_model* model, const char** out);
DOPPEL_API dp_status dp_model_configs_evaluated(const dp_model* model, size_t* out);
/* JSON object {"best_config": {...}, "best_val_metric": x, "trials": [...]} or "null". */
DOPPEL_API dp_status dp_model_search_summary(const dp_model* model, char** out);
/* Writes <filename>.onnx and <filename>.json. */
DOPPEL_API dp_status dp_model_save(const dp_model* model, const char* filename);
DOPPEL_API dp_status dp_model_load(const char* json_path, dp_model** out);
DOPPEL_API dp_status dp_model_export_onnx(const dp_model* model, const char* path);
/* Fits a depth-limited surrogate tree on the model's labels over the
 * reference dataset and renders the decision path of x. */
DOPPEL_API dp_status dp_model_explain(const dp_model* model, const dp_dataset* reference, const double* x,
                                      size_t cols, size_t max_depth, char** text_out, double* fidelity_out);
DOPPEL_API void dp_model_free(dp_model* model);

/* ---- ONNX files ----------------------------------------------------------- */

/* Parses an ONNX file and summarizes it as JSON (versions, op counts). */
DOPPEL_API dp_status dp_onnx_inspect(const char* path, char** summary_out);
/* Runs the reference interpreter; out receives rows x out_cols values. */
DOPPEL_API dp_status dp_onnx_run(const char* path, const double* X, size_t rows, size_t cols, double* out,
                                 size_t capacity, size_t* out_cols);

/* ---- reference benchmark -------------------------------------------------- */

/* Runs the seven reference rows. timing = 0 writes runtime 0 for
 * reproducible bytes. all_in_band may be NULL. */
DOPPEL_API dp_status dp_bench_run(uint64_t seed, double test_size, int timing, char** csv_out, char** table_out,
                                  int* all_in_band);

#ifdef __cplusplus
}
#endif

#endif
