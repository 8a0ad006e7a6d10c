/*
 * avood — audio-visual generalized zero-shot classification with post-hoc
 * out-of-distribution routing.
 *
 * C API over the shared library: opaque handles, status codes, thread-local
 * error messages. Every function returns AVOOD_OK (0) on success; on failure
 * it returns the status code and leaves a message in avood_last_error().
 *
 * Status codes double as CLI exit codes: 2 config error, 3 data/hygiene
 * error, 4 numerical error.
 */
#ifndef AVOOD_H
#define AVOOD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AVOOD_API __declspec(dllexport)
#else
#define AVOOD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum avood_status {
  AVOOD_OK = 0,
  AVOOD_ERROR_CONFIG = 2,
  AVOOD_ERROR_DATA = 3,
  AVOOD_ERROR_NUMERIC = 4
} avood_status;

/* Message for the most recent failure on this thread; valid until the next
 * failing call on the same thread. Never NULL. */
AVOOD_API const char* avood_last_error(void);

AVOOD_API const char* avood_version(void);

/* ------------------------------------------------------------------ */
/* Opaque handles                                                      */

typedef struct avood_dataset avood_dataset;   /* features + class embeddings */
typedef struct avood_mlp avood_mlp;           /* trained seen expert         */
typedef struct avood_detector avood_detector; /* subspace + threshold        */
typedef struct avood_aligner avood_aligner;   /* trained unseen expert       */
typedef struct avood_report avood_report;     /* evaluation results          */

/* ------------------------------------------------------------------ */
/* Configuration structs (plain data)                                  */

typedef struct avood_synth_config {
  uint32_t seen_classes;
  uint32_t unseen_classes;
  uint32_t feature_dim;
  uint32_t text_dim;
  uint32_t train_per_class;
  uint32_t test_per_class;
  double class_separation;
  double noise_scale;
  uint64_t seed;
} avood_synth_config;

/* 1536-d fused-feature geometry. */
AVOOD_API void avood_synth_config_default(avood_synth_config* cfg);
/* 64-d desk-scale profile used by the fast tests. */
AVOOD_API void avood_synth_config_small(avood_synth_config* cfg);

typedef struct avood_train_config {
  uint32_t hidden1, hidden2;
  double learning_rate, beta1, beta2, epsilon;
  uint32_t batch_size, epochs;
  uint64_t seed;
} avood_train_config;

AVOOD_API void avood_train_config_default(avood_train_config* cfg);

typedef struct avood_aligner_config {
  uint32_t embed_dim, proj_dim;
  double learning_rate, beta1, beta2, epsilon;
  uint32_t batch_size, epochs;
  uint64_t seed;
  int normalize_projections; /* 0/1; prediction-time unit-normalization */
} avood_aligner_config;

AVOOD_API void avood_aligner_config_default(avood_aligner_config* cfg);

typedef struct avood_detector_config {
  uint32_t principal_dim; /* 0 = auto: min(64, D/4) */
  double gamma;           /* < 0 = auto: argmax AUROC over {0} + default grid */
  double percentile;      /* calibration percentile of train-seen scores */
  int center;             /* 0/1; mean-center features before the Gram (off) */
} avood_detector_config;

AVOOD_API void avood_detector_config_default(avood_detector_config* cfg);

/* ------------------------------------------------------------------ */
/* Datasets                                                            */

AVOOD_API avood_status avood_dataset_generate(const avood_synth_config* cfg,
                                              avood_dataset** out);
/* Format by extension: ".csv" reads/writes the CSV pair, else AVF1 binary. */
AVOOD_API avood_status avood_dataset_load(const char* path, avood_dataset** out);
AVOOD_API avood_status avood_dataset_save(const avood_dataset* ds, const char* path);
AVOOD_API void avood_dataset_free(avood_dataset* ds);

typedef struct avood_dataset_info {
  uint32_t num_samples;
  uint32_t feature_dim;
  uint32_t num_classes;
  uint32_t text_dim;
  uint32_t num_seen_classes;
  uint32_t num_train_samples;
} avood_dataset_info;

AVOOD_API avood_status avood_dataset_get_info(const avood_dataset* ds, avood_dataset_info* out);
/* Scales every feature row to unit norm, in place. */
AVOOD_API avood_status avood_dataset_l2_normalize(avood_dataset* ds);

/* ------------------------------------------------------------------ */
/* Seen expert                                                          */

AVOOD_API avood_status avood_mlp_train(const avood_dataset* ds, const avood_train_config* cfg,
                                       avood_mlp** out);
AVOOD_API avood_status avood_mlp_save(const avood_mlp* mlp, const char* path);
AVOOD_API avood_status avood_mlp_load(const char* path, avood_mlp** out);
AVOOD_API void avood_mlp_free(avood_mlp* mlp);
/* Mean per-epoch training loss; *count receives the epoch count. The pointer
 * stays valid while the handle lives. */
AVOOD_API avood_status avood_mlp_train_loss(const avood_mlp* mlp, const double** loss,
                                            size_t* count);

/* ------------------------------------------------------------------ */
/* Detector                                                             */

AVOOD_API avood_status avood_detector_fit(const avood_dataset* ds, const avood_mlp* mlp,
                                          const avood_detector_config* cfg,
                                          avood_detector** out);
AVOOD_API avood_status avood_detector_save(const avood_detector* det, const char* path);
/* mlp may be NULL; when given, *hash_mismatch (if non-NULL) is set to 1 if the
 * bundle was calibrated against a different checkpoint (warning, not error). */
AVOOD_API avood_status avood_detector_load(const char* path, const avood_mlp* mlp,
                                           int* hash_mismatch, avood_detector** out);
AVOOD_API void avood_detector_free(avood_detector* det);

typedef struct avood_score_breakdown {
  double energy;
  double residual;
  double combined;
  int verdict_seen; /* 1 = routed seen (combined >= threshold) */
} avood_score_breakdown;

AVOOD_API avood_status avood_detector_score(const avood_detector* det, const avood_mlp* mlp,
                                            const double* feature, size_t dim,
                                            avood_score_breakdown* out);

/* ------------------------------------------------------------------ */
/* Unseen expert                                                        */

AVOOD_API avood_status avood_aligner_train(const avood_dataset* ds,
                                           const avood_aligner_config* cfg,
                                           avood_aligner** out);
AVOOD_API avood_status avood_aligner_save(const avood_aligner* al, const char* path);
AVOOD_API avood_status avood_aligner_load(const char* path, avood_aligner** out);
AVOOD_API void avood_aligner_free(avood_aligner* al);
AVOOD_API avood_status avood_aligner_train_loss(const avood_aligner* al, const double** loss,
                                                size_t* count);

/* Registers a custom unseen expert under `name`. The callback must write the
 * chosen class (one of the candidates) to *out_class and return 0; any other
 * return aborts the run with a config error. Built-ins: "aligner", "oracle". */
typedef int (*avood_expert_fn)(void* user_data, const double* feature, size_t dim,
                               const uint32_t* candidates, size_t n_candidates,
                               uint32_t* out_class);
AVOOD_API avood_status avood_expert_register(const char* name, avood_expert_fn fn,
                                             void* user_data);

/* ------------------------------------------------------------------ */
/* Evaluation                                                           */

/* Full GZSL routing and metrics with already-trained artifacts. `aligner` may
 * be NULL when `expert_name` does not need it. */
AVOOD_API avood_status avood_evaluate_gzsl(const avood_dataset* ds, const avood_mlp* mlp,
                                           const avood_detector* det,
                                           const avood_aligner* aligner,
                                           const char* expert_name, avood_report** out);
/* ZSL accuracy only: unseen expert over unseen test samples. */
AVOOD_API avood_status avood_evaluate_zsl(const avood_dataset* ds,
                                          const avood_aligner* aligner,
                                          const char* expert_name, avood_report** out);
AVOOD_API void avood_report_free(avood_report* report);

/* Named scalar: acc_S, acc_U, H, acc_ZSL, auroc, fpr95, aupr. */
AVOOD_API avood_status avood_report_value(const avood_report* report, const char* metric,
                                          double* out);
/* Rendered report bodies; free with avood_string_free. */
AVOOD_API avood_status avood_report_metrics_csv(const avood_report* report, char** out);
AVOOD_API avood_status avood_report_per_class_csv(const avood_report* report, char** out);
AVOOD_API avood_status avood_report_jsonl(const avood_report* report, char** out);
AVOOD_API avood_status avood_report_roc_csv(const avood_report* report, char** out);
AVOOD_API avood_status avood_report_summary(const avood_report* report, char** out);

/* ------------------------------------------------------------------ */
/* Sweeps                                                               */

/* gamma,auroc CSV over {0} ∪ grid (experts trained once). grid may be NULL to
 * use the default {0.1, 1, 10, 100, 250, 500, 1000}. */
AVOOD_API avood_status avood_sweep_gamma_csv(const avood_dataset* ds,
                                             const avood_train_config* seen_cfg,
                                             const avood_detector_config* det_cfg,
                                             const double* grid, size_t grid_len,
                                             uint64_t seed, char** out);
/* principal_dim,auroc,error CSV; one decomposition, re-sliced per entry. */
AVOOD_API avood_status avood_sweep_dim_csv(const avood_dataset* ds,
                                           const avood_train_config* seen_cfg,
                                           const avood_detector_config* det_cfg,
                                           const uint32_t* grid, size_t grid_len,
                                           uint64_t seed, char** out);

AVOOD_API void avood_string_free(char* s);

/* FNV-1a 64-bit content hash (provenance records). */
AVOOD_API uint64_t avood_fnv1a(const void* data, size_t n);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AVOOD_H */
