/*
 * etdpc — scanned-page classification pipeline.
 *
 * C API over the core library: opaque handles, integer status codes, and
 * JSON strings for structured options/results. Every function returning
 * etdpc_status sets a thread-local error message readable through
 * etdpc_last_error() on failure. Strings returned through out-parameters are
 * heap-allocated and must be released with etdpc_string_free().
 */

#ifndef ETDPC_H
#define ETDPC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum etdpc_status {
    ETDPC_OK = 0,
    ETDPC_ERROR_CONFIG = 1,  /* invalid options / configuration */
    ETDPC_ERROR_DATA = 2,    /* malformed or missing input data */
    ETDPC_ERROR_RUNTIME = 3, /* everything else */
} etdpc_status;

const char* etdpc_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
const char* etdpc_last_error(void);

void etdpc_string_free(char* s);

/*
 * Pipeline commands. `options_json` is the documented run-configuration tree
 * (sections: paths, seed, jobs, case, split, model, train, noise, render,
 * synthetic, vocab, augment, sweep, ablation); unknown keys are rejected.
 * On success *summary_json receives a JSON object describing the outcome.
 * The ETDPC_SEED environment variable overrides the configured master seed.
 */
etdpc_status etdpc_prepare(const char* options_json, char** summary_json);
etdpc_status etdpc_augment(const char* options_json, char** summary_json);
etdpc_status etdpc_train(const char* options_json, char** summary_json);
etdpc_status etdpc_evaluate(const char* options_json, char** summary_json);
etdpc_status etdpc_ablate(const char* options_json, char** summary_json);
etdpc_status etdpc_sweep(const char* options_json, char** summary_json);
etdpc_status etdpc_predict(const char* options_json, char** summary_json);
etdpc_status etdpc_end_to_end(const char* options_json, char** summary_json);

/*
 * Handle-based inference. A model is either one-level (one checkpoint,
 * level2_path NULL) or hierarchical (both checkpoints).
 */
typedef struct etdpc_model etdpc_model;

etdpc_status etdpc_model_open(const char* checkpoint_path, const char* level2_path_or_null,
                              etdpc_model** out_model);
void etdpc_model_close(etdpc_model* model);

/*
 * Classifies one page. `image` is 8-bit grayscale, row-major, height x width
 * (resized internally to the model's input size); `ocr_json` is the
 * Textract-shaped OCR document for the page. *result_json receives
 * {"label", ...} with probability vectors.
 */
etdpc_status etdpc_model_classify(etdpc_model* model, const uint8_t* image, int32_t height,
                                  int32_t width, const char* ocr_json, size_t ocr_json_len,
                                  char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* ETDPC_H */
