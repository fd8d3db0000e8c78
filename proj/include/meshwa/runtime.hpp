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

#ifndef MESHWA_RUNTIME_HPP_
#define MESHWA_RUNTIME_HPP_

// Loader tying the modules together: validates a manifest, instantiates
// every service into its own arena region, registers and links them and
// installs mesh policies.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshwa/ledger.hpp"
#include "meshwa/manifest.hpp"
#include "meshwa/mesh.hpp"
#include "meshwa/msb.hpp"
#include "meshwa/registry.hpp"
#include "meshwa/sasmem.hpp"
#include "meshwa/service.hpp"
#include "meshwa/xcall.hpp"

namespace meshwa {

struct RuntimeOptions {
  // 0 picks max(1 GiB, next power of two >= 2 * declared memory) at the
  // first deployment.
  std::uint64_t arena_bytes = 0;
  bool force_copy = false;
  std::uint64_t fuel = UINT64_MAX;  // per sandbox invocation
};

// Builtin native implementations selectable by a native service's image
// field (or its name when the image is empty):
//   echo   exports "echo": round-trips the payload through its view and
//          returns its size; without payload returns arg0 or 0
//   invert exports "invert": xors every payload byte with 0xFF
//   tap    exports "on_call": reads the payload, returns its byte sum
//   relay  exports "relay": forwards args and payload to slot 0 of the
//          first import
std::vector<std::string> builtin_names();

class Runtime {
 public:
  explicit Runtime(RuntimeOptions options = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // Throws Error{Validation} listing every violation, Error{Provenance}
  // naming the first rejected service, Error{Io} for unreadable images and
  // decoder/verifier errors for bad modules. Relative image paths resolve
  // against base_dir.
  void deploy(const Manifest& manifest, const std::filesystem::path& base_dir);

  // Registers a native service outside any manifest.
  void add_native(const std::string& name, std::vector<std::string> exports,
                  std::vector<NativeFunction> functions,
                  std::uint64_t memory_bytes = sasmem::kMinRegion);

  // Registers an already verified module. Imports naming services in
  // `peers` are linked to them; "proxy.*" imports to the proxy functions.
  void add_sandboxed(const std::string& name,
                     std::shared_ptr<const msb::VerifiedModule> module,
                     std::vector<std::string> peers,
                     std::uint64_t max_memory_bytes);

  void unregister(std::string_view name);

  // Operator-issued call (no calling service). Sandbox traps surface as
  // Error{CalleeTrapped}.
  std::optional<Value> invoke(std::string_view service,
                              std::string_view export_name,
                              std::span<const Value> args);

  // Linear memory of a sandboxed service, for inspection.
  std::span<const std::byte> sandbox_memory(std::string_view service) const;

  // {"registry":{"services","tables"},"mesh":[...],"allocator":{...}}
  std::string inspect_json() const;

  // Import namespaces served by the host rather than by a discovered
  // service, across all sandboxed services.
  std::vector<std::string> host_import_namespaces() const;

  Registry& registry() noexcept { return registry_; }
  Ledger& ledger() noexcept { return ledger_; }
  Xcall& xcall() noexcept { return xcall_; }
  Mesh& mesh() noexcept { return mesh_; }
  sasmem::Arena& arena();
  const RuntimeOptions& options() const noexcept { return options_; }

  struct SandboxLink;

 private:
  void ensure_arena(std::uint64_t declared_bytes);
  void link_sandbox(const std::string& name);

  RuntimeOptions options_;
  std::unique_ptr<sasmem::Arena> arena_;
  Registry registry_;
  Ledger ledger_;
  Xcall xcall_;
  Mesh mesh_;
  std::map<std::string, std::unique_ptr<SandboxLink>, std::less<>> sandboxes_;
};

}  // namespace meshwa

#endif  // MESHWA_RUNTIME_HPP_
