/* Exercises the public header from C. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "doppel/doppel.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

#define EXPECT_OK(call)                                                              \
  do {                                                                               \
    dp_status s_ = (call);                                                           \
    if (s_ != DP_OK) {                                                               \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call, dp_status_name(s_), \
              dp_last_error());                                                      \
      ++failures;                                                                    \
    }                                                                                \
  } while (0)

static void test_errors(void) {
  dp_dataset* ds = NULL;
  EXPECT(dp_dataset_builtin("mnist", &ds) == DP_ERR_LOOKUP);
  EXPECT(ds == NULL);
  EXPECT(strstr(dp_last_error(), "mnist") != NULL);
  EXPECT(dp_dataset_builtin(NULL, &ds) == DP_ERR_INPUT);
  EXPECT(strcmp(dp_status_name(DP_ERR_PARSE), "parse error") == 0);

  dp_primal* p = NULL;
  EXPECT(dp_primal_new("xgboost", NULL, &p) == DP_ERR_LOOKUP);
  EXPECT(dp_primal_new("ridge", "{\"alpha\": -1}", &p) == DP_ERR_CONFIG);
  EXPECT(dp_primal_new("ridge", "{oops", &p) == DP_ERR_PARSE);
  EXPECT(dp_model_load("/nonexistent/model.json", NULL) != DP_OK);
  dp_dataset_free(NULL);
  dp_primal_free(NULL);
  dp_model_free(NULL);
}

static void test_dataset(void) {
  const double X[] = {0, 1, 2, 3, 4, 5};
  const double y[] = {0, 1, 0};
  dp_dataset* ds = NULL;
  size_t rows = 0, cols = 0, classes = 0;
  EXPECT_OK(dp_dataset_from_arrays(X, 3, 2, y, "classification", &ds));
  EXPECT_OK(dp_dataset_shape(ds, &rows, &cols, &classes));
  EXPECT(rows == 3 && cols == 2 && classes == 2);
  double back[6];
  EXPECT(dp_dataset_features(ds, back, 5) == DP_ERR_DIMENSION);
  EXPECT_OK(dp_dataset_features(ds, back, 6));
  EXPECT(back[5] == 5.0);
  dp_dataset_free(ds);

  dp_dataset* iris = NULL;
  dp_dataset *train = NULL, *test = NULL;
  EXPECT_OK(dp_dataset_builtin("iris", &iris));
  EXPECT_OK(dp_dataset_standardize(iris));
  EXPECT_OK(dp_dataset_split(iris, 0.6, 0, &train, &test));
  EXPECT_OK(dp_dataset_shape(test, &rows, NULL, NULL));
  EXPECT(rows == 90);
  dp_dataset_free(train);
  dp_dataset_free(test);
  dp_dataset_free(iris);
}

static void test_pipeline(void) {
  dp_dataset *iris = NULL, *train = NULL, *test = NULL;
  dp_primal* primal = NULL;
  dp_model *model = NULL, *loaded = NULL;
  double primal_acc = 0, score[2] = {0, 0}, loaded_score[2] = {0, 0};
  const char* strategy = NULL;
  size_t configs = 99;
  int fitted = 0;
  char* summary = NULL;
  char* text = NULL;
  double fid = 0;
  const char* stem = "capi_test_model";

  EXPECT_OK(dp_dataset_builtin("iris", &iris));
  EXPECT_OK(dp_dataset_standardize(iris));
  EXPECT_OK(dp_dataset_split(iris, 0.6, 0, &train, &test));
  EXPECT_OK(dp_primal_new("logistic", NULL, &primal));
  EXPECT_OK(dp_primal_fit(primal, train));
  EXPECT_OK(dp_primal_score(primal, test, &primal_acc));
  EXPECT(fabs(primal_acc - 0.82) <= 0.05);

  EXPECT_OK(dp_dope(primal, NULL, NULL, &model));
  EXPECT_OK(dp_model_strategy(model, &strategy));
  EXPECT(strategy && strcmp(strategy, "exact") == 0);
  EXPECT_OK(dp_model_is_fitted(model, &fitted));
  EXPECT(fitted == 1);
  EXPECT_OK(dp_model_configs_evaluated(model, &configs));
  EXPECT(configs == 0);
  EXPECT_OK(dp_model_score(model, test, score));
  EXPECT(fabs(score[1] - primal_acc) < 1e-12);
  EXPECT(dp_model_fit(model, train, "{\"optimizer\": {\"grid_search\": [\"adam\", \"nadam\"]}}") ==
         DP_ERR_CONFIG);

  EXPECT_OK(dp_model_save(model, stem));
  EXPECT_OK(dp_model_load("capi_test_model.json", &loaded));
  EXPECT_OK(dp_model_score(loaded, test, loaded_score));
  EXPECT(fabs(loaded_score[0] - score[0]) < 1e-12);
  EXPECT_OK(dp_onnx_inspect("capi_test_model.onnx", &summary));
  EXPECT(summary && strstr(summary, "Gemm") != NULL);
  dp_string_free(summary);

  /* Raw rows are unscaled: the stored standardization applies. */
  {
    const double setosa[] = {5.1, 3.5, 1.4, 0.2};
    double label = -1, onnx_out[3] = {0, 0, 0};
    size_t out_cols = 0;
    EXPECT_OK(dp_model_predict(loaded, setosa, 1, 4, &label));
    EXPECT(label == 0.0);
    EXPECT_OK(dp_model_export_onnx(loaded, "capi_test_export.onnx"));
    EXPECT_OK(dp_onnx_run("capi_test_export.onnx", setosa, 1, 4, onnx_out, 3, &out_cols));
    EXPECT(out_cols == 3);
    EXPECT(onnx_out[0] > onnx_out[1] && onnx_out[0] > onnx_out[2]);
  }

  EXPECT(dp_model_explain(loaded, train, NULL, 0, 0, NULL, NULL) != DP_OK);
  {
    const double x[] = {0.1, -0.2, 0.3, 0.1};
    EXPECT_OK(dp_model_explain(loaded, train, x, 4, 3, &text, &fid));
    EXPECT(text && strstr(text, "fidelity=") != NULL);
    EXPECT(fid >= 0.0 && fid <= 1.0);
    dp_string_free(text);
  }

  remove("capi_test_model.json");
  remove("capi_test_model.onnx");
  remove("capi_test_export.onnx");
  dp_model_free(loaded);
  dp_model_free(model);
  dp_primal_free(primal);
  dp_dataset_free(train);
  dp_dataset_free(test);
  dp_dataset_free(iris);
}

static void test_search(void) {
  dp_dataset *iris = NULL, *train = NULL, *test = NULL;
  dp_primal* primal = NULL;
  dp_model* model = NULL;
  size_t configs = 0;
  char* summary = NULL;
  double score[2];

  EXPECT_OK(dp_dataset_builtin("iris", &iris));
  EXPECT_OK(dp_dataset_standardize(iris));
  EXPECT_OK(dp_dataset_split(iris, 0.6, 0, &train, &test));
  EXPECT_OK(dp_primal_new("logistic", NULL, &primal));
  EXPECT_OK(dp_dope(primal, NULL, "{\"epochs\": 30, \"learning_rate\": 0.01}", &model));
  EXPECT_OK(dp_model_fit(model, train, "{\"optimizer\": {\"grid_search\": [\"adam\", \"nadam\"]}}"));
  EXPECT_OK(dp_model_configs_evaluated(model, &configs));
  EXPECT(configs == 2);
  EXPECT_OK(dp_model_search_summary(model, &summary));
  EXPECT(summary && strstr(summary, "best_config") != NULL);
  dp_string_free(summary);
  EXPECT_OK(dp_model_score(model, test, score));
  EXPECT(score[1] > 0.6);
  EXPECT(dp_dope(primal, "telepathic", NULL, &model) != DP_OK);
  EXPECT(dp_dope(primal, NULL, "{\"epochs\": -3}", &model) != DP_OK);

  dp_model_free(model);
  dp_primal_free(primal);
  dp_dataset_free(train);
  dp_dataset_free(test);
  dp_dataset_free(iris);
}

int main(void) {
  EXPECT(strlen(dp_version()) > 0);
  test_errors();
  test_dataset();
  test_pipeline();
  test_search();
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
