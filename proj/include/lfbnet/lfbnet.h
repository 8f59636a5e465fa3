/*
 * lfbnet — latent-feedback encoder–decoder segmentation.
 *
 * C interface to the training/evaluation pipeline and to trained models.
 * All functions are synchronous. A session carries the last error message of
 * the calls made through it; sessions and models are not thread-safe (use one
 * per thread). Strings returned through char** out-parameters are heap
 * allocations owned by the caller; release them with lfbnet_string_free.
 *
 * Thread count for the GEMM backend is read from the LFBNET_THREADS
 * environment variable (default 1) the first time it is needed;
 * LFBNET_BLAS=internal selects the built-in fallback GEMM.
 */

#ifndef LFBNET_H
#define LFBNET_H

#include <stdint.h>

#if defined(_WIN32)
#define LFBNET_API __declspec(dllexport)
#else
#define LFBNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lfbnet_status {
    LFBNET_OK = 0,
    LFBNET_ERROR_INVALID_ARGUMENT = 1, /* bad parameter or inconsistent config */
    LFBNET_ERROR_IO = 2,               /* file system failure */
    LFBNET_ERROR_FORMAT = 3,           /* unparsable JSON/CSV/binary input */
    LFBNET_ERROR_RUNTIME = 4           /* anything else */
} lfbnet_status;

typedef struct lfbnet_session lfbnet_session;
typedef struct lfbnet_model lfbnet_model;

/* Progress callback for long-running calls: receives one human-readable line
 * per training cycle. Return nonzero to continue, 0 to stop after the current
 * cycle (the best-so-far weights are kept). */
typedef int32_t (*lfbnet_progress_fn)(void* user_data, const char* line);

LFBNET_API const char* lfbnet_version(void);
LFBNET_API const char* lfbnet_status_name(lfbnet_status status);

LFBNET_API lfbnet_session* lfbnet_session_create(void);
LFBNET_API void lfbnet_session_destroy(lfbnet_session* session);
/* Message of the most recent failing call through this session ("" after a
 * success). The pointer is valid until the next call on the session. */
LFBNET_API const char* lfbnet_last_error(const lfbnet_session* session);
LFBNET_API void lfbnet_string_free(char* str);

/* Generate a synthetic phantom dataset described by a PhantomSpec JSON
 * document (every key optional; see the project README). Writes images/,
 * labels/, phantom.json and manifest.txt under out_dir. The split fractions
 * are (train, test, val) and must sum to 1 with no empty split. */
LFBNET_API lfbnet_status lfbnet_generate_dataset(lfbnet_session* session,
                                                 const char* spec_json, int32_t n,
                                                 double f_train, double f_test, double f_val,
                                                 const char* out_dir,
                                                 char** out_manifest_path,
                                                 char** out_spec_hash);

/* Train per an experiment-config JSON document (variant, model, train,
 * dataset, output_dir; every field optional). Writes checkpoint.lfbc,
 * history.csv and summary.json under the configured output_dir; the summary
 * JSON is also returned. */
LFBNET_API lfbnet_status lfbnet_train(lfbnet_session* session, const char* config_json,
                                      lfbnet_progress_fn progress, void* user_data,
                                      char** out_summary_json);

/* Evaluate a checkpoint on one split of a dataset manifest: per-sample
 * Dice/HD/RVD plus hole/component counts, written as a CSV report to
 * out_csv_path. iterations selects feedback-loop passes (checkpoint must
 * contain the feedback system when > 0). with_thresholds != 0 adds the
 * worst-case flag columns (dice below dice_min, HD above hd_max_mm). */
LFBNET_API lfbnet_status lfbnet_evaluate(lfbnet_session* session, const char* checkpoint_path,
                                         const char* manifest_path, const char* split,
                                         int32_t iterations, const char* out_csv_path,
                                         int32_t with_thresholds, double dice_min,
                                         double hd_max_mm, char** out_summary_json);

/* Train and evaluate every (variant, seed) combination on one dataset and
 * write a comparative table plus pairwise Wilcoxon tests under the config's
 * output_dir. variants_csv example: "fs,fs_star,lfb"; seeds_csv: "7,11,13". */
LFBNET_API lfbnet_status lfbnet_ablate(lfbnet_session* session, const char* config_json,
                                       const char* variants_csv, const char* seeds_csv,
                                       lfbnet_progress_fn progress, void* user_data,
                                       char** out_summary_json);

/* Paired Wilcoxon signed-rank tests between two report CSVs per metric and
 * class, matched by sample id; significance at p < 0.05. */
LFBNET_API lfbnet_status lfbnet_compare_reports(lfbnet_session* session,
                                                const char* report_a_path,
                                                const char* report_b_path,
                                                char** out_summary_json);

/* Load a checkpoint for direct inference. Model calls report their errors on
 * the session that opened the model, so keep it alive while the model is. */
LFBNET_API lfbnet_status lfbnet_model_open(lfbnet_session* session,
                                           const char* checkpoint_path,
                                           lfbnet_model** out_model);
LFBNET_API void lfbnet_model_close(lfbnet_model* model);

/* Checkpoint metadata (variant, model widths, normalization, parameter
 * counts) as JSON. */
LFBNET_API lfbnet_status lfbnet_model_info(lfbnet_model* model, char** out_info_json);

/* Segment one image. `image` is row-major height*width float64 in the
 * training intensity units (normalization is applied internally from the
 * checkpoint); height and width must equal the model's image size.
 * out_labels receives height*width class indices. out_probabilities is
 * optional: classes*height*width doubles, channel-major. */
LFBNET_API lfbnet_status lfbnet_model_infer(lfbnet_model* model, const double* image,
                                            int32_t height, int32_t width,
                                            int32_t iterations, uint8_t* out_labels,
                                            double* out_probabilities);

#ifdef __cplusplus
}
#endif

#endif /* LFBNET_H */
