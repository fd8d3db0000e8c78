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

#include "meshwa/runtime.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>

#include "json.hpp"

#include "meshwa/error.hpp"

namespace meshwa {
namespace {

constexpr std::uint64_t kDefaultArena = std::uint64_t{1} << 30;

// In-band status codes returned by the proxy imports.
enum ProxyStatus : Value {
  kProxyOk = 0,
  kProxyUnknownBinding = -1,
  kProxyRevoked = -2,
  kProxyNotAuthorized = -3,
  kProxyOutOfBounds = -4,
  kProxyGone = -5,
  kProxyFailed = -6,
};

Value proxy_status(const Error& e) {
  switch (e.code()) {
    case Errc::UnknownBinding: return kProxyUnknownBinding;
    case Errc::Revoked: return kProxyRevoked;
    case Errc::NotAuthorized: return kProxyNotAuthorized;
    case Errc::OutOfBounds: return kProxyOutOfBounds;
    case Errc::AlreadyDestroyed:
    case Errc::UnknownHandle: return kProxyGone;
    default: return kProxyFailed;
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::Io, "error reading " + path.string());
  return bytes;
}

std::vector<std::byte> read_payload(const PayloadView& view) {
  std::vector<std::byte> bytes(static_cast<std::size_t>(view.size()));
  view.read(0, bytes);
  return bytes;
}

msb::HostFunction trap_stub() {
  return [](msb::ServiceInstance&, std::span<const Value>) -> std::optional<Value> {
    throw msb::HostTrap{TrapKind::UnreachableImport};
  };
}

struct Builtin {
  std::vector<std::string> exports;
  std::vector<NativeFunction> functions;
};

std::optional<Builtin> make_builtin(std::string_view id, const std::string& self,
                                    std::vector<std::string> imports,
                                    Registry& registry) {
  if (id == "echo") {
    return Builtin{{"echo"}, {[](CallFrame& f) -> std::optional<Value> {
                     if (f.payload_view == nullptr) {
                       return f.args.empty() ? 0 : f.args[0];
                     }
                     auto bytes = read_payload(*f.payload_view);
                     if (f.payload_view->writable()) f.payload_view->write(0, bytes);
                     return static_cast<Value>(bytes.size());
                   }}};
  }
  if (id == "invert") {
    return Builtin{{"invert"}, {[](CallFrame& f) -> std::optional<Value> {
                     if (f.payload_view == nullptr) return 0;
                     auto bytes = read_payload(*f.payload_view);
                     for (auto& b : bytes) b ^= std::byte{0xFF};
                     f.payload_view->write(0, bytes);
                     return static_cast<Value>(bytes.size());
                   }}};
  }
  if (id == "tap") {
    return Builtin{{std::string(kProxyExport)},
                   {[](CallFrame& f) -> std::optional<Value> {
                     if (f.payload_view == nullptr) return 0;
                     Value sum = 0;
                     for (auto b : read_payload(*f.payload_view)) {
                       sum += std::to_integer<Value>(b);
                     }
                     return sum;
                   }}};
  }
  if (id == "relay") {
    if (imports.empty()) return std::nullopt;
    return Builtin{
        {"relay"},
        {[&registry, self, target = imports.front()](
             CallFrame& f) -> std::optional<Value> {
          return f.xcall->call(self, registry.discover(self, target), 0, f.args,
                               f.payload);
        }}};
  }
  return std::nullopt;
}

class SandboxService final : public Service {
 public:
  SandboxService(msb::ServiceInstance instance, std::string name,
                 std::uint64_t fuel)
      : instance_(std::move(instance)), name_(std::move(name)), fuel_(fuel) {}

  std::optional<Value> call(std::uint32_t export_index,
                            CallFrame& frame) override {
    const auto& image = instance_.module().image();
    const std::uint32_t function = image.exports.at(export_index).function;
    std::vector<Value> args;
    args.reserve(frame.args.size() + 2);
    std::span<std::byte> staged;
    if (frame.payload_view != nullptr) {
      const std::uint64_t size = frame.payload_view->size();
      if (frame.binding == BindingMode::DirectCall) {
        // A sandbox cannot address host objects; stage like CopyInOut.
        if (size > instance_.cur_bytes()) {
          throw Error(Errc::PayloadTooLarge,
                      "payload does not fit the memory of " + name_);
        }
        staged = instance_.memory().first(static_cast<std::size_t>(size));
        frame.payload_view->read(0, staged);
      }
      args.push_back(frame.payload_ref);
      args.push_back(static_cast<Value>(size));
    }
    args.insert(args.end(), frame.args.begin(), frame.args.end());
    msb::InvokeOptions options;
    options.fuel = fuel_;
    msb::InvokeResult result = instance_.invoke_function(function, args, options);
    if (result.trap) {
      throw Error(Errc::CalleeTrapped,
                  name_ + " trapped: " + std::string(trap_name(*result.trap)),
                  result.trap);
    }
    if (!staged.empty() && frame.payload_view->writable()) {
      frame.payload_view->write(0, staged);
    }
    return result.value;
  }

  std::span<std::byte> io_window() override { return instance_.memory(); }

  msb::ServiceInstance& instance() noexcept { return instance_; }

 private:
  msb::ServiceInstance instance_;
  std::string name_;
  std::uint64_t fuel_;
};

}  // namespace

struct Runtime::SandboxLink {
  std::shared_ptr<SandboxService> service;
  std::vector<std::string> peers;
  std::set<std::string> host_namespaces;
};

std::vector<std::string> builtin_names() {
  return {"echo", "invert", "relay", "tap"};
}

Runtime::Runtime(RuntimeOptions options)
    : options_(options),
      registry_(options.force_copy),
      ledger_([this](std::string_view name) {
        return registry_.find(name) != nullptr;
      }),
      xcall_(registry_, ledger_),
      mesh_(registry_, xcall_) {
  if (options_.arena_bytes != 0) ensure_arena(0);
}

Runtime::~Runtime() {
  // Tear services down before the arena their memory lives in.
  sandboxes_.clear();
  for (const auto& name : registry_.names()) {
    try {
      registry_.unregister(name);
    } catch (const Error&) {
    }
  }
}

void Runtime::ensure_arena(std::uint64_t declared_bytes) {
  if (arena_) return;
  std::uint64_t size = options_.arena_bytes;
  if (size == 0) {
    size = kDefaultArena;
    if (declared_bytes > size / 2) size = std::bit_ceil(declared_bytes * 2);
  }
  arena_ = std::make_unique<sasmem::Arena>(size);
}

sasmem::Arena& Runtime::arena() {
  ensure_arena(0);
  return *arena_;
}

void Runtime::add_native(const std::string& name,
                         std::vector<std::string> exports,
                         std::vector<NativeFunction> functions,
                         std::uint64_t memory_bytes) {
  ensure_arena(0);
  const sasmem::Region region =
      arena_->allocate(name, std::max<std::uint64_t>(memory_bytes, 1));
  try {
    auto impl = std::make_shared<NativeService>(std::move(functions),
                                                arena_->bytes(region));
    registry_.register_service(name, std::move(impl), std::move(exports),
                               SafetyClass::ObjectGranular);
  } catch (...) {
    arena_->free(name);
    throw;
  }
}

void Runtime::add_sandboxed(const std::string& name,
                            std::shared_ptr<const msb::VerifiedModule> module,
                            std::vector<std::string> peers,
                            std::uint64_t max_memory_bytes) {
  ensure_arena(0);
  const std::uint64_t needed =
      std::uint64_t{module->image().max_pages} * msb::kPageSize;
  if (needed > max_memory_bytes) {
    throw Error(Errc::RegionTooSmall,
                name + ": module max_pages needs " + std::to_string(needed) +
                    " bytes but max_memory_bytes is " +
                    std::to_string(max_memory_bytes));
  }
  std::vector<std::string> exports;
  for (const auto& e : module->image().exports) exports.push_back(e.name);
  const sasmem::Region region =
      arena_->allocate(name, std::max<std::uint64_t>(max_memory_bytes, 1));
  try {
    std::vector<msb::HostFunction> stubs(module->imports().size(), trap_stub());
    auto instance = msb::instantiate(std::move(module), std::move(stubs), region,
                                     arena_->bytes(region));
    auto link = std::make_unique<SandboxLink>();
    link->service = std::make_shared<SandboxService>(std::move(instance), name,
                                                     options_.fuel);
    link->peers = std::move(peers);
    registry_.register_service(name, link->service, std::move(exports),
                               SafetyClass::RegionGranular);
    sandboxes_[name] = std::move(link);
  } catch (...) {
    arena_->free(name);
    throw;
  }
  link_sandbox(name);
}

void Runtime::link_sandbox(const std::string& name) {
  SandboxLink& link = *sandboxes_.at(name);
  msb::ServiceInstance& instance = link.service->instance();
  const auto& imports = instance.module().imports();
  link.host_namespaces.clear();
  for (std::size_t i = 0; i < imports.size(); ++i) {
    const msb::ImportSignature& sig = imports[i];
    msb::HostFunction fn = trap_stub();
    if (sig.target == "proxy") {
      link.host_namespaces.insert("proxy");
      if ((sig.field == "read" || sig.field == "write") && sig.nargs == 4 &&
          sig.nrets == 1) {
        const bool is_read = sig.field == "read";
        fn = [this, name, is_read](msb::ServiceInstance& inst,
                                   std::span<const Value> a) -> std::optional<Value> {
          if (a[0] >= 0) return kProxyUnknownBinding;
          try {
            const auto binding = static_cast<BindingId>(-a[0]);
            const auto obj_off = static_cast<std::uint64_t>(a[1]);
            const auto mem_off = static_cast<std::uint64_t>(a[2]);
            const auto len = static_cast<std::uint64_t>(a[3]);
            if (is_read) {
              ledger_.proxy_read(binding, name, obj_off, inst.memory(), mem_off,
                                 len);
            } else {
              ledger_.proxy_write(binding, name, obj_off, inst.memory(), mem_off,
                                  len);
            }
            return kProxyOk;
          } catch (const Error& e) {
            return proxy_status(e);
          }
        };
      } else if (sig.field == "size" && sig.nargs == 1 && sig.nrets == 1) {
        fn = [this, name](msb::ServiceInstance&,
                          std::span<const Value> a) -> std::optional<Value> {
          if (a[0] >= 0) return kProxyUnknownBinding;
          const auto b = ledger_.binding(static_cast<BindingId>(-a[0]));
          if (!b || b->grantee != name) return kProxyUnknownBinding;
          if (!b->active) return kProxyRevoked;
          try {
            return static_cast<Value>(ledger_.size(b->handle));
          } catch (const Error& e) {
            return proxy_status(e);
          }
        };
      }
    } else if (std::find(link.peers.begin(), link.peers.end(), sig.target) !=
                   link.peers.end() &&
               registry_.find(sig.target)) {
      FunctionTable& table = registry_.discover(name, sig.target);
      if (const auto slot = table.find(sig.field)) {
        fn = [this, name, &table, slot = *slot](
                 msb::ServiceInstance&,
                 std::span<const Value> a) -> std::optional<Value> {
          return xcall_.call(name, table, slot, a);
        };
      }
    }
    instance.rebind_import(i, std::move(fn));
  }
}

void Runtime::deploy(const Manifest& manifest,
                     const std::filesystem::path& base_dir) {
  if (const auto violations = validate_manifest(manifest); !violations.empty()) {
    std::string message = "manifest has " + std::to_string(violations.size()) +
                          " violation(s):";
    for (const auto& v : violations) {
      message += "\n  " + std::string(violation_name(v.kind)) + " at " +
                 v.path + ": " + v.message;
    }
    throw Error(Errc::Validation, message);
  }
  for (const auto& s : manifest.services) {
    if (!verify_provenance(s, manifest.allowlist)) {
      throw Error(Errc::Provenance, "service " + s.name + ": toolchain \"" +
                                        s.toolchain + "\" is not allowlisted");
    }
  }

  for (const auto& s : manifest.services) {
    if (registry_.find(s.name)) {
      throw Error(Errc::DuplicateName, "service " + s.name + " is already deployed");
    }
  }

  std::map<std::string, std::shared_ptr<const msb::VerifiedModule>> modules;
  std::uint64_t declared = 0;
  for (const auto& s : manifest.services) {
    if (s.kind == ServiceKind::Sandboxed) {
      std::filesystem::path path(s.image);
      if (path.is_relative()) path = base_dir / path;
      modules[s.name] = std::make_shared<const msb::VerifiedModule>(
          msb::verify_module(msb::decode_module(read_file(path))));
      declared += sasmem::region_length_for(std::max<std::uint64_t>(
          s.max_memory_bytes, 1));
    } else {
      declared +=
          sasmem::region_length_for(std::max<std::uint64_t>(s.memory_bytes, 1));
    }
  }
  ensure_arena(declared);

  std::vector<std::string> added;
  try {
    for (const auto& s : manifest.services) {
      if (s.kind == ServiceKind::Sandboxed) {
        add_sandboxed(s.name, modules.at(s.name), s.imports, s.max_memory_bytes);
      } else {
        const std::string& id = s.image.empty() ? s.name : s.image;
        auto builtin = make_builtin(id, s.name, s.imports, registry_);
        if (!builtin) {
          throw Error(Errc::Validation, "service " + s.name +
                                            ": no native implementation \"" +
                                            id + "\"");
        }
        add_native(s.name, std::move(builtin->exports),
                   std::move(builtin->functions), s.memory_bytes);
      }
      added.push_back(s.name);
    }
    for (const auto& s : manifest.services) {
      if (s.kind == ServiceKind::Sandboxed) link_sandbox(s.name);
    }
    for (const auto& p : manifest.mesh) mesh_.install_policy(p);
  } catch (...) {
    for (auto it = added.rbegin(); it != added.rend(); ++it) {
      try {
        unregister(*it);
      } catch (const Error&) {
      }
    }
    throw;
  }
}

void Runtime::unregister(std::string_view name) {
  auto link = sandboxes_.find(name);
  if (link != sandboxes_.end()) {
    // The registry entry must hold the last reference so the instance and
    // its region claim go away at unregister.
    link->second->service.reset();
    sandboxes_.erase(link);
  }
  registry_.unregister(name);
  arena_->free(name);
}

std::optional<Value> Runtime::invoke(std::string_view service,
                                     std::string_view export_name,
                                     std::span<const Value> args) {
  auto entry = registry_.find(service);
  if (!entry) {
    throw Error(Errc::NotFound, "no service " + std::string(service));
  }
  const auto index = entry->export_index(export_name);
  if (!index) {
    throw Error(Errc::ExportNotFound, std::string(service) + " has no export \"" +
                                          std::string(export_name) + "\"");
  }
  return xcall_.invoke(*entry, *index, BindingMode::DirectCall, {}, args,
                       std::nullopt);
}

std::span<const std::byte> Runtime::sandbox_memory(
    std::string_view service) const {
  auto it = sandboxes_.find(service);
  if (it == sandboxes_.end()) {
    throw Error(Errc::NotFound, "no sandboxed service " + std::string(service));
  }
  return it->second->service->instance().memory();
}

std::string Runtime::inspect_json() const {
  using nlohmann::json;
  json mesh = json::array();
  for (const auto& p : mesh_.policies()) {
    json obj = {{"caller", p.caller},
                {"callee", p.callee},
                {"policy", std::string(mesh_mode_name(p.mode))}};
    if (p.mode != MeshMode::Passthrough) obj["proxy"] = p.proxy;
    if (p.mode == MeshMode::ElideAfter) obj["elide_after"] = p.elide_after;
    const EdgeStats s = mesh_.edge_stats(p.caller, p.callee);
    obj["stats"] = {{"total", s.calls_total},
                    {"intercepted", s.calls_intercepted},
                    {"direct", s.calls_direct},
                    {"elided_at", s.elided_at ? json(*s.elided_at) : json()}};
    mesh.push_back(std::move(obj));
  }
  json allocator = json::object();
  if (arena_) {
    json regions = json::array();
    for (const auto& r : arena_->regions()) {
      regions.push_back({{"owner", r.owner},
                         {"base", r.base},
                         {"length", r.length},
                         {"bucket_class", r.bucket_class}});
    }
    json census = json::object();
    for (const auto& [cls, c] : arena_->fragmentation_report()) {
      census[std::to_string(cls)] = {{"free_blocks", c.free_blocks},
                                     {"allocated_blocks", c.allocated_blocks}};
    }
    allocator = {{"arena_bytes", arena_->size()},
                 {"regions", std::move(regions)},
                 {"fragmentation_report", std::move(census)}};
  }
  json doc = {{"registry", json::parse(registry_.dump_json())},
              {"mesh", std::move(mesh)},
              {"allocator", std::move(allocator)}};
  return doc.dump(2);
}

std::vector<std::string> Runtime::host_import_namespaces() const {
  std::set<std::string> all;
  for (const auto& [name, link] : sandboxes_) {
    all.insert(link->host_namespaces.begin(), link->host_namespaces.end());
  }
  return {all.begin(), all.end()};
}

}  // namespace meshwa
