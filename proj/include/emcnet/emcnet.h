// Copyright 2026 The EMCNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMCNET_EMCNET_H
#define EMCNET_EMCNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EMCNET_API __declspec(dllexport)
#else
#define EMCNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emcnet_status {
  EMCNET_OK = 0,
  EMCNET_ERR_INVALID_ARGUMENT = 1, /* bad shapes, indices, null pointers */
  EMCNET_ERR_CONFIG = 2,           /* invalid configuration or request */
  EMCNET_ERR_NUMERIC = 3,          /* NaN/Inf during compute */
  EMCNET_ERR_IO = 4,
  EMCNET_ERR_FORMAT = 5, /* malformed image, manifest or checkpoint */
  EMCNET_ERR_MISMATCH = 6, /* checkpoint and configuration disagree */
  EMCNET_ERR_INTERNAL = 7
} emcnet_status;

typedef struct emcnet_model emcnet_model;

EMCNET_API const char* emcnet_version(void);

/* Message of the last failure on the calling thread; empty after success. */
EMCNET_API const char* emcnet_last_error(void);

/* Releases strings returned through char** out-parameters. */
EMCNET_API void emcnet_free_string(char* s);

/* options_json: {"classes","per_class","side","seed","val_fraction","test_fraction"},
 * all optional. Writes out_dir/manifest.json and out_dir/images/. */
EMCNET_API emcnet_status emcnet_synth(const char* options_json, const char* out_dir, char** manifest_path);

/* Clique tree of the rows x cols 8-neighbourhood grid as JSON
 * {supernodes, edges, root, fill_edges[, rip]}. A negative root_seed keeps
 * the lowest-index leaf as root. With verify set, "rip" holds
 * {"ok": bool, "message": str}. */
EMCNET_API emcnet_status emcnet_decompose(size_t rows, size_t cols, int verify, int64_t root_seed, char** json);

/* request_json: {"manifest": path, "out": dir,
 *                "config": {"model": {...}, "train": {...}},
 *                "setting": "default" | "fs" | "ss",
 *                "overrides": {"model": {...}, "train": {...}}}
 * Layers apply in that order. The output directory must not exist or be
 * empty; results are staged next to it and moved in on success. */
EMCNET_API emcnet_status emcnet_train(const char* request_json, char** summary_json);

EMCNET_API emcnet_status emcnet_model_load(const char* checkpoint_path, emcnet_model** model);
EMCNET_API void emcnet_model_free(emcnet_model* model);

/* {"model": config, "k_max", "n_patches", "classes", "n_params"} */
EMCNET_API emcnet_status emcnet_model_info(const emcnet_model* model, char** json);

/* Class probabilities for one image file. probs may be null to query the
 * class count; otherwise capacity must cover every class. */
EMCNET_API emcnet_status emcnet_model_predict_file(const emcnet_model* model, const char* image_path, double* probs,
                                                   size_t capacity, size_t* n_classes, size_t* predicted);

/* request_json: {"manifest": path, "split": "train"|"val"|"test"|"all",
 *                "topn": [1, 5], "config": {"model": {...}}, "dump_pooling": bool}
 * "config", when present, is checked against the checkpoint. */
EMCNET_API emcnet_status emcnet_model_evaluate(const emcnet_model* model, const char* request_json,
                                               char** result_json);

/* component may be null or "" for every component. passed receives 1 when
 * every check is within tolerance. */
EMCNET_API emcnet_status emcnet_gradcheck(const char* component, int inject_fault, int* passed, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* EMCNET_EMCNET_H */
