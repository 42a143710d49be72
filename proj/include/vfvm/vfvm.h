#ifndef VFVM_H
#define VFVM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(VFVM_BUILDING_LIBRARY)
#    define VFVM_API __declspec(dllexport)
#  else
#    define VFVM_API __declspec(dllimport)
#  endif
#else
#  define VFVM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vfvm_status {
  VFVM_OK = 0,
  VFVM_ERR_INTERNAL = 1,
  VFVM_ERR_ARGUMENT = 2,
  VFVM_ERR_DATA = 3, /* parse, schema, structural and I/O errors */
  VFVM_ERR_FIT = 4
} vfvm_status;

typedef struct vfvm_dataset vfvm_dataset;
typedef struct vfvm_model vfvm_model;

/* Message of the last failed call on this thread ("" after success). */
VFVM_API const char* vfvm_last_error(void);
VFVM_API const char* vfvm_version(void);

/* Strings returned through char** are owned by the caller. */
VFVM_API void vfvm_string_free(char* s);

/* ---- datasets ---- */

VFVM_API vfvm_status vfvm_dataset_create(vfvm_dataset** out);
VFVM_API void vfvm_dataset_free(vfvm_dataset* d);
VFVM_API vfvm_status vfvm_dataset_read_csv(const char* path, vfvm_dataset** out);
VFVM_API vfvm_status vfvm_dataset_write_csv(const vfvm_dataset* d, const char* path);
VFVM_API vfvm_status vfvm_dataset_size(const vfvm_dataset* d, size_t* n);
/* ct = (med, iqr, vol, elo, flat, sphe); has_rat = 0 leaves rat unused. */
VFVM_API vfvm_status vfvm_dataset_add_row(vfvm_dataset* d, uint64_t id, const double ct[6],
                                          int has_rat, double rat);
VFVM_API vfvm_status vfvm_dataset_get_row(const vfvm_dataset* d, size_t i, uint64_t* id,
                                          double ct[6], int* has_rat, double* rat);

/* Labeled volume + phase slices -> descriptor dataset. */
VFVM_API vfvm_status vfvm_descriptors(const char* volume_path, const char* labels_path,
                                      const char* const* slice_paths, size_t n_slices,
                                      int include_unlabeled, vfvm_dataset** out);

/* ---- fitting ---- */

enum { VFVM_ENGINE_RVINE = 0, VFVM_ENGINE_ARCHIMEDEAN = 1 };
enum {
  VFVM_FAMILY_FRANK = 1,
  VFVM_FAMILY_CLAYTON = 2,
  VFVM_FAMILY_GUMBEL = 4,
  VFVM_FAMILY_JOE = 8
};

typedef struct vfvm_fit_options {
  int engine;
  double epsilon;
  double atom_width;
  unsigned families; /* bit set of VFVM_FAMILY_* */
  int rank_pseudo_obs;
  size_t min_rows;
  int em_max_iter;
  double em_tol;
  double copula_tol;
  double integration_tol;
  double median_tol;
} vfvm_fit_options;

VFVM_API void vfvm_fit_options_default(vfvm_fit_options* o);

VFVM_API vfvm_status vfvm_fit(const vfvm_dataset* d, const vfvm_fit_options* o,
                              vfvm_model** out);
VFVM_API void vfvm_model_free(vfvm_model* m);
VFVM_API vfvm_status vfvm_model_load(const char* path, vfvm_model** out);
VFVM_API vfvm_status vfvm_model_save(const vfvm_model* m, const char* path);
VFVM_API vfvm_status vfvm_model_to_json(const vfvm_model* m, char** out);
VFVM_API vfvm_status vfvm_model_from_json(const char* text, vfvm_model** out);
VFVM_API vfvm_status vfvm_model_counts(const vfvm_model* m, size_t* n_v, size_t* n_nv,
                                       size_t* n_c);
VFVM_API vfvm_status vfvm_model_parameter_count(const vfvm_model* m, size_t* k);
VFVM_API vfvm_status vfvm_model_engine(const vfvm_model* m, int* engine);

/* Training scores (JSON score report with "all" and "composite_only"). */
VFVM_API vfvm_status vfvm_model_score(const vfvm_model* m, const vfvm_dataset* d, char** json);

/* ---- prediction ---- */

enum { VFVM_CLASS_VALUABLE = 0, VFVM_CLASS_NON_VALUABLE = 1, VFVM_CLASS_COMPOSITE = 2 };

typedef struct vfvm_prediction {
  double value;
  int cls;
  double conditional_median; /* composite class only */
  int out_of_support;        /* value is NaN when set */
} vfvm_prediction;

VFVM_API vfvm_status vfvm_predict(const vfvm_model* m, const double ct[6],
                                  vfvm_prediction* out);
VFVM_API vfvm_status vfvm_composite_density(const vfvm_model* m, const double x[7],
                                            double* out);

/* ---- evaluation ---- */

typedef struct vfvm_loo_options {
  vfvm_fit_options fit;
  int fast;
  size_t parallelism;
} vfvm_loo_options;

VFVM_API void vfvm_loo_options_default(vfvm_loo_options* o);

/* Leave-one-out cross-validation. report_json holds the "all" and
   "composite_only" scores, errors_csv the per-row errors. Either output
   may be NULL. */
VFVM_API vfvm_status vfvm_loo(const vfvm_dataset* d, const vfvm_loo_options* o,
                              char** report_json, char** errors_csv, size_t* fits);

/* Aligned text table from a JSON array of score report documents. */
VFVM_API vfvm_status vfvm_render_report(const char* const* report_jsons, size_t n,
                                        char** text, char** merged_json);

/* ---- sampling and synthetic data ---- */

/* n rows split over the classes in proportion to the model counts. */
VFVM_API vfvm_status vfvm_sample(const vfvm_model* m, size_t n, uint64_t seed,
                                 vfvm_dataset** out);

/* Renders a scene spec into out_dir: volume.vxl, labels.vxl,
   slice_<k>.json and the descriptor dataset descriptors.csv. seed_override
   replaces the spec seed when use_seed_override is non-zero. */
VFVM_API vfvm_status vfvm_synth_scene(const char* spec_path, const char* out_dir,
                                      int use_seed_override, uint64_t seed_override);

/* Benchmark truth model and a dataset drawn from it. */
VFVM_API vfvm_status vfvm_benchmark_model(vfvm_model** out);
VFVM_API vfvm_status vfvm_synth_dataset(const vfvm_model* truth, size_t n_v, size_t n_nv,
                                        size_t n_c, uint64_t seed, vfvm_dataset** out);

/* ---- weight maps ---- */

typedef struct vfvm_weight_options {
  double d_hat;
  double decay;
  double floor;
} vfvm_weight_options;

VFVM_API void vfvm_weight_options_default(vfvm_weight_options* o);

/* Writes a float32 weight map for the annotated z planes of a label
   volume. c_f (may be NULL) receives the foreground weight. */
VFVM_API vfvm_status vfvm_weight_map(const char* labels_path, const size_t* annotated_z,
                                     size_t n_z, const vfvm_weight_options* o,
                                     const char* out_path, double* c_f);

#ifdef __cplusplus
}
#endif

#endif
