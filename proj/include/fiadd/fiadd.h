#ifndef FIADD_FIADD_H
#define FIADD_FIADD_H

/* C interface to the fiadd engine. All objects are opaque handles created
 * and destroyed through this API. Functions return a status code; on failure
 * fiadd_last_error() describes the problem (per thread, valid until the next
 * call on that thread). Strings handed out through char** parameters are
 * owned by the caller and released with fiadd_free_string. Reports come back
 * as JSON text. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FIADD_BUILDING_LIBRARY)
#    define FIADD_API __declspec(dllexport)
#  else
#    define FIADD_API __declspec(dllimport)
#  endif
#else
#  define FIADD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fiadd_status {
  FIADD_OK = 0,
  FIADD_ERR_INVALID = 1,  /* bad argument, config value or input file content */
  FIADD_ERR_IO = 2,       /* file could not be read or written */
  FIADD_ERR_DIVERGED = 3, /* training hit a non-finite loss; a model is still returned */
  FIADD_ERR_INTERNAL = 4
} fiadd_status;

typedef struct fiadd_config fiadd_config;
typedef struct fiadd_dataset fiadd_dataset;
typedef struct fiadd_model fiadd_model;

FIADD_API const char* fiadd_version(void);
FIADD_API const char* fiadd_last_error(void);
FIADD_API void fiadd_free_string(char* s);

/* Configuration: flat "section.key" -> value map, loadable from INI text. */
FIADD_API fiadd_status fiadd_config_create(fiadd_config** out);
FIADD_API fiadd_status fiadd_config_load(const char* path, fiadd_config** out);
FIADD_API fiadd_status fiadd_config_parse(const char* text, fiadd_config** out);
FIADD_API fiadd_status fiadd_config_set(fiadd_config* cfg, const char* key, const char* value);
/* *out_value is NULL when the key is absent. */
FIADD_API fiadd_status fiadd_config_get(const fiadd_config* cfg, const char* key, char** out_value);
FIADD_API fiadd_status fiadd_config_clone(const fiadd_config* cfg, fiadd_config** out);
FIADD_API void fiadd_config_destroy(fiadd_config* cfg);

/* Datasets. expected_dim 0 accepts whatever the header declares. */
FIADD_API fiadd_status fiadd_dataset_load(const char* path, size_t expected_dim, fiadd_dataset** out);
FIADD_API fiadd_status fiadd_dataset_save(const fiadd_dataset* ds, const char* path);
/* Reads the [synth] section. */
FIADD_API fiadd_status fiadd_dataset_synthesize(const fiadd_config* cfg, uint64_t seed, fiadd_dataset** out);
/* Line-delimited violation records in *report; *violations counts them.
 * Unparseable files are reported as a single violation, not an error. */
FIADD_API fiadd_status fiadd_dataset_validate_file(const char* path, size_t expected_dim, char** report,
                                                   size_t* violations);
/* Stratified split; *warnings (may be NULL) receives newline-separated notes. */
FIADD_API fiadd_status fiadd_dataset_split(const fiadd_dataset* ds, double ratio, uint64_t seed,
                                           fiadd_dataset** train, fiadd_dataset** test, char** warnings);
FIADD_API size_t fiadd_dataset_size(const fiadd_dataset* ds);
FIADD_API size_t fiadd_dataset_dim(const fiadd_dataset* ds);
FIADD_API int fiadd_dataset_num_classes(const fiadd_dataset* ds);
FIADD_API void fiadd_dataset_destroy(fiadd_dataset* ds);

/* Trains with the [train] and [objective] sections; `seed` overrides
 * train.seed. On FIADD_ERR_DIVERGED *out still holds the last finite model. */
FIADD_API fiadd_status fiadd_train(const fiadd_dataset* train, const fiadd_dataset* test, const fiadd_config* cfg,
                                   uint64_t seed, fiadd_model** out);
FIADD_API fiadd_status fiadd_model_save(const fiadd_model* model, const char* path);
FIADD_API fiadd_status fiadd_model_load(const char* path, fiadd_model** out);
/* One JSON record per evaluation. Empty for loaded models. */
FIADD_API fiadd_status fiadd_model_history(const fiadd_model* model, char** jsonl);
FIADD_API fiadd_status fiadd_model_summary(const fiadd_model* model, char** json);
/* nearest_cluster != 0 predicts the class of the nearest subcluster centroid. */
FIADD_API fiadd_status fiadd_model_predict(const fiadd_model* model, const double* x, size_t d_in, int use_best,
                                           int nearest_cluster, int* out_label);
FIADD_API void fiadd_model_destroy(fiadd_model* model);

/* Metrics on `ds` using eval.mode, eval.merge and eval.weights. */
FIADD_API fiadd_status fiadd_evaluate(const fiadd_model* model, const fiadd_dataset* ds, const fiadd_config* cfg,
                                      char** json);
/* Latent-space diagnostics from the [analyze] section. model may be NULL,
 * in which case only the raw-space distance report is produced. */
FIADD_API fiadd_status fiadd_analyze(const fiadd_model* model, const fiadd_dataset* ds, const fiadd_config* cfg,
                                     char** json);
FIADD_API fiadd_status fiadd_dump_latent(const fiadd_model* model, const fiadd_dataset* ds, int use_best,
                                         const char* path);
/* Gradient checks from the [gradcheck] section; *all_passed is 1 or 0. */
FIADD_API fiadd_status fiadd_gradcheck(const fiadd_config* cfg, char** json, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif
