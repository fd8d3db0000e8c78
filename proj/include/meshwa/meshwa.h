// Copyright 2026 The MeSHwA Authors
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

#ifndef MESHWA_MESHWA_H_
#define MESHWA_MESHWA_H_

/* C interface to the meshwa runtime. Every call returns a meshwa_status;
 * on failure the thread-local meshwa_last_error*() functions describe it.
 * Strings returned through char** outputs are owned by the caller and
 * released with meshwa_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(MESHWA_BUILDING_LIBRARY)
#define MESHWA_API __attribute__((visibility("default")))
#else
#define MESHWA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct meshwa_runtime meshwa_runtime;

typedef enum meshwa_status {
  MESHWA_OK = 0,
  MESHWA_ERR_VALIDATION = 1, /* manifest, provenance, module or usage */
  MESHWA_ERR_TRAP = 2,       /* a service trapped */
  MESHWA_ERR_IO = 3,
  MESHWA_ERR_RUNTIME = 4     /* anything else */
} meshwa_status;

MESHWA_API const char* meshwa_last_error(void);
/* Error code name, e.g. "CalleeTrapped"; "" after success. */
MESHWA_API const char* meshwa_last_error_code(void);
/* Trap name, e.g. "OutOfBounds", or NULL when the failure was no trap. */
MESHWA_API const char* meshwa_last_trap(void);

MESHWA_API const char* meshwa_status_name(meshwa_status status);

MESHWA_API meshwa_status meshwa_runtime_create(meshwa_runtime** out,
                                               int force_copy);
MESHWA_API void meshwa_runtime_destroy(meshwa_runtime* runtime);

/* Parses, validates and deploys a manifest file. Relative image paths
 * resolve against the manifest's directory. */
MESHWA_API meshwa_status meshwa_deploy_file(meshwa_runtime* runtime,
                                            const char* manifest_path);

/* Checks a manifest file without deploying it. On MESHWA_ERR_VALIDATION
 * *report receives one violation per line. */
MESHWA_API meshwa_status meshwa_validate_manifest_file(const char* path,
                                                       char** report);

/* Operator call of one export. *has_result is set to 1 when the export
 * returned a value. */
MESHWA_API meshwa_status meshwa_invoke(meshwa_runtime* runtime,
                                       const char* service,
                                       const char* export_name,
                                       const int64_t* args, size_t nargs,
                                       int64_t* result, int* has_result);

/* Call from `caller` through its table for `target`. payload 0 = none. */
MESHWA_API meshwa_status meshwa_call(meshwa_runtime* runtime,
                                     const char* caller, const char* target,
                                     const char* export_name,
                                     const int64_t* args, size_t nargs,
                                     uint64_t payload, int64_t* result,
                                     int* has_result);

MESHWA_API meshwa_status meshwa_object_create(meshwa_runtime* runtime,
                                              const char* owner, uint64_t size,
                                              uint64_t* handle);
MESHWA_API meshwa_status meshwa_object_write(meshwa_runtime* runtime,
                                             uint64_t handle,
                                             const char* service,
                                             uint64_t offset, const void* data,
                                             size_t len);
MESHWA_API meshwa_status meshwa_object_read(meshwa_runtime* runtime,
                                            uint64_t handle,
                                            const char* service,
                                            uint64_t offset, void* data,
                                            size_t len);
MESHWA_API meshwa_status meshwa_object_release(meshwa_runtime* runtime,
                                               uint64_t handle,
                                               const char* owner);

/* JSON snapshot of registry, tables, mesh policies and allocator. */
MESHWA_API meshwa_status meshwa_inspect(meshwa_runtime* runtime, char** json);

typedef enum meshwa_topology {
  MESHWA_TOPOLOGY_CHAIN = 0,
  MESHWA_TOPOLOGY_FANOUT = 1
} meshwa_topology;

enum {
  MESHWA_MESH_INTERCEPT = 1, /* add an inproc+intercept row */
  MESHWA_MESH_ELIDE = 2      /* add an inproc+elide row */
};

typedef struct meshwa_bench_options {
  const char* manifest_path;
  meshwa_topology topology;
  uint32_t size; /* chain length or fan-out width */
  uint64_t payload_bytes;
  uint64_t iterations;
  uint64_t warmup_iterations;
  uint64_t compute_spin_ns;
  int baseline; /* add a process baseline row */
  int sidecar;  /* baseline with forwarder processes */
  int mesh;     /* MESHWA_MESH_* flags */
  const char* out_path;
} meshwa_bench_options;

/* Runs the configured benchmarks, writes the CSV report to out_path and
 * returns the human-readable summary in *summary. */
MESHWA_API meshwa_status meshwa_bench(const meshwa_bench_options* options,
                                      char** summary);

MESHWA_API void meshwa_string_free(char* str);

#ifdef __cplusplus
}
#endif

#endif /* MESHWA_MESHWA_H_ */
