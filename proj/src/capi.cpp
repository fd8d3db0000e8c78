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

#include "meshwa/meshwa.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "meshwa/bench.hpp"
#include "meshwa/error.hpp"
#include "meshwa/manifest.hpp"
#include "meshwa/runtime.hpp"

struct meshwa_runtime {
  meshwa::Runtime runtime;
  explicit meshwa_runtime(meshwa::RuntimeOptions options) : runtime(options) {}
};

namespace {

thread_local std::string t_message;
thread_local std::string t_code;
thread_local std::string t_trap;
thread_local bool t_has_trap = false;

void clear_error() {
  t_message.clear();
  t_code.clear();
  t_has_trap = false;
}

meshwa_status status_for(meshwa::Errc code) {
  using meshwa::Errc;
  switch (code) {
    case Errc::CalleeTrapped:
    case Errc::ProxyTrapped:
      return MESHWA_ERR_TRAP;
    case Errc::Io:
      return MESHWA_ERR_IO;
    case Errc::Syntax:
    case Errc::Schema:
    case Errc::BadMagic:
    case Errc::BadVersion:
    case Errc::Truncated:
    case Errc::LimitExceeded:
    case Errc::BadOpcode:
    case Errc::BadImport:
    case Errc::TrailingBytes:
    case Errc::Verify:
    case Errc::RegionTooSmall:
    case Errc::Validation:
    case Errc::Provenance:
    case Errc::ZeroIterations:
    case Errc::InvalidWorkload:
    case Errc::ExportNotFound:
    case Errc::ArityMismatch:
    case Errc::NotFound:
      return MESHWA_ERR_VALIDATION;
    default:
      return MESHWA_ERR_RUNTIME;
  }
}

template <typename F>
meshwa_status guarded(F&& body) {
  clear_error();
  try {
    body();
    return MESHWA_OK;
  } catch (const meshwa::Error& e) {
    t_message = e.what();
    t_code = std::string(meshwa::errc_name(e.code()));
    if (e.trap()) {
      t_trap = std::string(meshwa::trap_name(*e.trap()));
      t_has_trap = true;
    }
    return status_for(e.code());
  } catch (const std::bad_alloc&) {
    t_message = "out of memory";
    t_code = "OutOfMemory";
  } catch (const std::exception& e) {
    t_message = e.what();
    t_code = "Internal";
  }
  return MESHWA_ERR_RUNTIME;
}

meshwa_status usage(const char* message) {
  clear_error();
  t_message = message;
  t_code = "Usage";
  return MESHWA_ERR_VALIDATION;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_result(const std::optional<meshwa::Value>& value, int64_t* result,
                int* has_result) {
  if (has_result != nullptr) *has_result = value.has_value() ? 1 : 0;
  if (result != nullptr) *result = value.value_or(0);
}

std::string violation_report(const std::vector<meshwa::Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    out += std::string(meshwa::violation_name(v.kind)) + " " + v.path + " " +
           v.subject + ": " + v.message + "\n";
  }
  return out;
}

}  // namespace

extern "C" {

const char* meshwa_last_error(void) { return t_message.c_str(); }
const char* meshwa_last_error_code(void) { return t_code.c_str(); }
const char* meshwa_last_trap(void) {
  return t_has_trap ? t_trap.c_str() : nullptr;
}

const char* meshwa_status_name(meshwa_status status) {
  switch (status) {
    case MESHWA_OK: return "ok";
    case MESHWA_ERR_VALIDATION: return "validation";
    case MESHWA_ERR_TRAP: return "trap";
    case MESHWA_ERR_IO: return "io";
    case MESHWA_ERR_RUNTIME: return "runtime";
  }
  return "unknown";
}

meshwa_status meshwa_runtime_create(meshwa_runtime** out, int force_copy) {
  if (out == nullptr) return usage("out must not be NULL");
  return guarded([&] {
    meshwa::RuntimeOptions options;
    options.force_copy = force_copy != 0;
    *out = new meshwa_runtime(options);
  });
}

void meshwa_runtime_destroy(meshwa_runtime* runtime) { delete runtime; }

meshwa_status meshwa_deploy_file(meshwa_runtime* runtime,
                                 const char* manifest_path) {
  if (runtime == nullptr || manifest_path == nullptr) {
    return usage("runtime and manifest_path must not be NULL");
  }
  return guarded([&] {
    const std::filesystem::path path(manifest_path);
    const meshwa::Manifest manifest = meshwa::load_manifest_file(path);
    runtime->runtime.deploy(manifest, path.parent_path());
  });
}

meshwa_status meshwa_validate_manifest_file(const char* path, char** report) {
  if (path == nullptr) return usage("path must not be NULL");
  if (report != nullptr) *report = nullptr;
  std::vector<meshwa::Violation> violations;
  const meshwa_status status = guarded([&] {
    violations = meshwa::validate_manifest(meshwa::load_manifest_file(path));
  });
  if (status != MESHWA_OK) return status;
  if (violations.empty()) return MESHWA_OK;
  t_message = std::to_string(violations.size()) + " manifest violation(s)";
  t_code = std::string(meshwa::errc_name(meshwa::Errc::Validation));
  if (report != nullptr) {
    const meshwa_status copied =
        guarded([&] { *report = dup_string(violation_report(violations)); });
    if (copied != MESHWA_OK) return copied;
    t_message = std::to_string(violations.size()) + " manifest violation(s)";
    t_code = std::string(meshwa::errc_name(meshwa::Errc::Validation));
  }
  return MESHWA_ERR_VALIDATION;
}

meshwa_status meshwa_invoke(meshwa_runtime* runtime, const char* service,
                            const char* export_name, const int64_t* args,
                            size_t nargs, int64_t* result, int* has_result) {
  if (runtime == nullptr || service == nullptr || export_name == nullptr ||
      (args == nullptr && nargs != 0)) {
    return usage("invalid NULL argument");
  }
  return guarded([&] {
    set_result(runtime->runtime.invoke(service, export_name,
                                       std::span<const int64_t>(args, nargs)),
               result, has_result);
  });
}

meshwa_status meshwa_call(meshwa_runtime* runtime, const char* caller,
                          const char* target, const char* export_name,
                          const int64_t* args, size_t nargs, uint64_t payload,
                          int64_t* result, int* has_result) {
  if (runtime == nullptr || caller == nullptr || target == nullptr ||
      export_name == nullptr || (args == nullptr && nargs != 0)) {
    return usage("invalid NULL argument");
  }
  return guarded([&] {
    meshwa::Runtime& rt = runtime->runtime;
    meshwa::FunctionTable& table = rt.registry().discover(caller, target);
    const auto slot = table.find(export_name);
    if (!slot) {
      throw meshwa::Error(meshwa::Errc::ExportNotFound,
                          std::string(target) + " has no export \"" +
                              export_name + "\"");
    }
    std::optional<meshwa::ObjectHandle> handle;
    if (payload != 0) handle = meshwa::ObjectHandle{payload};
    set_result(rt.xcall().call(caller, table, *slot,
                               std::span<const int64_t>(args, nargs), handle),
               result, has_result);
  });
}

meshwa_status meshwa_object_create(meshwa_runtime* runtime, const char* owner,
                                   uint64_t size, uint64_t* handle) {
  if (runtime == nullptr || owner == nullptr || handle == nullptr) {
    return usage("invalid NULL argument");
  }
  return guarded(
      [&] { *handle = runtime->runtime.ledger().create_object(owner, size).id; });
}

meshwa_status meshwa_object_write(meshwa_runtime* runtime, uint64_t handle,
                                  const char* service, uint64_t offset,
                                  const void* data, size_t len) {
  if (runtime == nullptr || service == nullptr || (data == nullptr && len != 0)) {
    return usage("invalid NULL argument");
  }
  return guarded([&] {
    runtime->runtime.ledger().write(
        meshwa::ObjectHandle{handle}, service, offset,
        std::span<const std::byte>(static_cast<const std::byte*>(data), len));
  });
}

meshwa_status meshwa_object_read(meshwa_runtime* runtime, uint64_t handle,
                                 const char* service, uint64_t offset,
                                 void* data, size_t len) {
  if (runtime == nullptr || service == nullptr || (data == nullptr && len != 0)) {
    return usage("invalid NULL argument");
  }
  return guarded([&] {
    runtime->runtime.ledger().read(
        meshwa::ObjectHandle{handle}, service, offset,
        std::span<std::byte>(static_cast<std::byte*>(data), len));
  });
}

meshwa_status meshwa_object_release(meshwa_runtime* runtime, uint64_t handle,
                                    const char* owner) {
  if (runtime == nullptr || owner == nullptr) {
    return usage("invalid NULL argument");
  }
  return guarded([&] {
    runtime->runtime.ledger().owner_release(meshwa::ObjectHandle{handle}, owner);
  });
}

meshwa_status meshwa_inspect(meshwa_runtime* runtime, char** json) {
  if (runtime == nullptr || json == nullptr) {
    return usage("invalid NULL argument");
  }
  return guarded([&] { *json = dup_string(runtime->runtime.inspect_json()); });
}

meshwa_status meshwa_bench(const meshwa_bench_options* options,
                           char** summary) {
  if (options == nullptr || options->manifest_path == nullptr ||
      options->out_path == nullptr) {
    return usage("options, manifest_path and out_path must not be NULL");
  }
  if (summary != nullptr) *summary = nullptr;
  return guarded([&] {
    namespace b = meshwa::bench;
    const std::filesystem::path path(options->manifest_path);
    const meshwa::Manifest manifest = meshwa::load_manifest_file(path);
    b::WorkloadSpec spec;
    if (options->topology == MESHWA_TOPOLOGY_FANOUT) {
      spec.topology = b::FanOut{options->size};
    } else {
      spec.topology = b::Chain{options->size};
    }
    spec.payload_bytes = options->payload_bytes;
    spec.iterations = options->iterations;
    spec.warmup_iterations = options->warmup_iterations;
    spec.compute_spin_ns = options->compute_spin_ns;
    b::validate_workload(spec);

    std::vector<b::BenchReport> reports;
    reports.push_back(b::run_inproc(manifest, spec, b::InprocMesh::None,
                                    path.parent_path()));
    if (options->mesh & MESHWA_MESH_INTERCEPT) {
      reports.push_back(b::run_inproc(manifest, spec, b::InprocMesh::Intercept,
                                      path.parent_path()));
    }
    if (options->mesh & MESHWA_MESH_ELIDE) {
      reports.push_back(b::run_inproc(manifest, spec, b::InprocMesh::Elide,
                                      path.parent_path()));
    }
    if (options->baseline) {
      b::BaselineConfig config;
      config.sidecar = options->sidecar != 0;
      reports.push_back(b::run_process_baseline(manifest, spec, config));
    }
    std::ostringstream text;
    b::emit_report(reports, options->out_path, text);
    if (summary != nullptr) *summary = dup_string(text.str());
  });
}

void meshwa_string_free(char* str) { std::free(str); }

}  // extern "C"
