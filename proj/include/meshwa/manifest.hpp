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

#ifndef MESHWA_MANIFEST_HPP_
#define MESHWA_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meshwa {

inline constexpr std::uint64_t kSandboxMemoryCap = std::uint64_t{1} << 32;

enum class ServiceKind : std::uint8_t { Sandboxed, Native };

// Object-granular services are trusted native code; region-granular
// services are confined to their linear memory by the sandbox.
enum class SafetyClass : std::uint8_t { ObjectGranular, RegionGranular };

constexpr SafetyClass safety_class(ServiceKind kind) noexcept {
  return kind == ServiceKind::Native ? SafetyClass::ObjectGranular
                                     : SafetyClass::RegionGranular;
}

std::string_view kind_name(ServiceKind kind) noexcept;
std::string_view class_name(SafetyClass cls) noexcept;

struct ServiceDescriptor {
  std::string name;
  ServiceKind kind = ServiceKind::Sandboxed;
  // Module path for sandboxed services. For native services an optional
  // builtin implementation id; empty means "use the service name".
  std::string image;
  std::uint64_t memory_bytes = 0;
  std::uint64_t max_memory_bytes = 0;
  std::string toolchain;
  std::vector<std::string> imports;

  bool operator==(const ServiceDescriptor&) const = default;
};

enum class MeshMode : std::uint8_t { Passthrough, Intercept, ElideAfter };

std::string_view mesh_mode_name(MeshMode mode) noexcept;

struct MeshPolicy {
  std::string caller;
  std::string callee;
  MeshMode mode = MeshMode::Passthrough;
  std::string proxy;            // Intercept / ElideAfter
  std::uint64_t elide_after = 0;  // ElideAfter, >= 1

  bool operator==(const MeshPolicy&) const = default;
};

struct Manifest {
  std::vector<ServiceDescriptor> services;
  std::vector<MeshPolicy> mesh;
  std::vector<std::string> allowlist;

  const ServiceDescriptor* find(std::string_view name) const noexcept;
  bool operator==(const Manifest&) const = default;
};

// Throws Error{Syntax} for malformed JSON and SchemaError (with a JSON
// pointer) for anything that does not fit the schema, including the
// 4 GiB sandbox cap, duplicate names and memory_bytes > max_memory_bytes.
Manifest parse_manifest(std::string_view text);

std::string serialize_manifest(const Manifest& manifest);

// Reads and parses a manifest file. Throws Error{Io} when unreadable.
Manifest load_manifest_file(const std::filesystem::path& path);

struct Violation {
  enum class Kind : std::uint8_t {
    DanglingImport,
    DanglingMeshEndpoint,
    DanglingProxy,
    MemoryBounds,
    SandboxCap,
    DuplicateService,
    DuplicateEdge,
    BadName,
    BadPolicy,
    MissingImage,
  };
  Kind kind;
  std::string subject;  // offending service / endpoint name
  std::string path;     // JSON pointer into the manifest
  std::string message;
};

std::string_view violation_name(Violation::Kind kind) noexcept;

// Reports every violation, not just the first.
std::vector<Violation> validate_manifest(const Manifest& manifest);

// Exact, case-sensitive membership; an empty allowlist rejects everything.
bool verify_provenance(const ServiceDescriptor& service,
                       std::span<const std::string> allowlist) noexcept;

bool is_valid_service_name(std::string_view name) noexcept;

}  // namespace meshwa

#endif  // MESHWA_MANIFEST_HPP_
