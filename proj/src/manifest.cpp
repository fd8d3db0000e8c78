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

#include "meshwa/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "meshwa/error.hpp"

namespace meshwa {
namespace {

using nlohmann::json;

std::string child(const std::string& base, std::string_view key) {
  return base + "/" + std::string(key);
}

std::string child(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SchemaError(child(path, key), "unknown key");
    }
  }
}

const json& require(const json& obj, const std::string& path,
                    std::string_view key) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw SchemaError(child(path, key), "missing required key");
  }
  return *it;
}

std::string as_string(const json& value, const std::string& path) {
  if (!value.is_string()) throw SchemaError(path, "expected a string");
  return value.get<std::string>();
}

std::uint64_t as_count(const json& value, const std::string& path) {
  if (!value.is_number_unsigned()) {
    throw SchemaError(path, "expected a non-negative integer");
  }
  return value.get<std::uint64_t>();
}

std::vector<std::string> as_string_array(const json& value,
                                         const std::string& path) {
  if (!value.is_array()) throw SchemaError(path, "expected an array");
  std::vector<std::string> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(as_string(value[i], child(path, i)));
  }
  return out;
}

ServiceDescriptor parse_service(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  reject_unknown_keys(obj, path,
                      {"name", "kind", "image", "memory_bytes",
                       "max_memory_bytes", "toolchain", "imports"});
  ServiceDescriptor d;
  d.name = as_string(require(obj, path, "name"), child(path, "name"));
  if (!is_valid_service_name(d.name)) {
    throw SchemaError(child(path, "name"),
                      "service name must match [a-z0-9_.-]+");
  }
  const std::string kind =
      as_string(require(obj, path, "kind"), child(path, "kind"));
  if (kind == "sandboxed") {
    d.kind = ServiceKind::Sandboxed;
  } else if (kind == "native") {
    d.kind = ServiceKind::Native;
  } else {
    throw SchemaError(child(path, "kind"),
                      "kind must be \"sandboxed\" or \"native\"");
  }
  if (d.kind == ServiceKind::Sandboxed) {
    d.image = as_string(require(obj, path, "image"), child(path, "image"));
  } else if (auto it = obj.find("image"); it != obj.end()) {
    d.image = as_string(*it, child(path, "image"));
  }
  d.memory_bytes = as_count(require(obj, path, "memory_bytes"),
                            child(path, "memory_bytes"));
  d.max_memory_bytes = as_count(require(obj, path, "max_memory_bytes"),
                                child(path, "max_memory_bytes"));
  if (d.kind == ServiceKind::Sandboxed &&
      d.max_memory_bytes > kSandboxMemoryCap) {
    throw SchemaError(child(path, "max_memory_bytes"),
                      "exceeds 4 GiB cap for sandboxed services");
  }
  if (d.memory_bytes > d.max_memory_bytes) {
    throw SchemaError(child(path, "memory_bytes"),
                      "memory_bytes exceeds max_memory_bytes");
  }
  d.toolchain =
      as_string(require(obj, path, "toolchain"), child(path, "toolchain"));
  d.imports = as_string_array(require(obj, path, "imports"),
                              child(path, "imports"));
  return d;
}

MeshPolicy parse_policy(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  reject_unknown_keys(obj, path,
                      {"caller", "callee", "policy", "proxy", "elide_after"});
  MeshPolicy p;
  p.caller = as_string(require(obj, path, "caller"), child(path, "caller"));
  p.callee = as_string(require(obj, path, "callee"), child(path, "callee"));
  const std::string mode =
      as_string(require(obj, path, "policy"), child(path, "policy"));
  if (mode == "passthrough") {
    p.mode = MeshMode::Passthrough;
  } else if (mode == "intercept") {
    p.mode = MeshMode::Intercept;
  } else if (mode == "elide_after") {
    p.mode = MeshMode::ElideAfter;
  } else {
    throw SchemaError(child(path, "policy"),
                      "policy must be passthrough, intercept or elide_after");
  }
  const bool has_proxy = obj.contains("proxy");
  const bool has_n = obj.contains("elide_after");
  if (p.mode == MeshMode::Passthrough) {
    if (has_proxy) throw SchemaError(child(path, "proxy"), "not allowed");
  } else {
    p.proxy = as_string(require(obj, path, "proxy"), child(path, "proxy"));
  }
  if (p.mode == MeshMode::ElideAfter) {
    p.elide_after = as_count(require(obj, path, "elide_after"),
                             child(path, "elide_after"));
    if (p.elide_after < 1) {
      throw SchemaError(child(path, "elide_after"), "must be >= 1");
    }
  } else if (has_n) {
    throw SchemaError(child(path, "elide_after"), "not allowed");
  }
  return p;
}

}  // namespace

std::string_view kind_name(ServiceKind kind) noexcept {
  return kind == ServiceKind::Native ? "native" : "sandboxed";
}

std::string_view class_name(SafetyClass cls) noexcept {
  return cls == SafetyClass::ObjectGranular ? "ObjectGranular"
                                            : "RegionGranular";
}

std::string_view mesh_mode_name(MeshMode mode) noexcept {
  switch (mode) {
    case MeshMode::Passthrough: return "passthrough";
    case MeshMode::Intercept: return "intercept";
    case MeshMode::ElideAfter: return "elide_after";
  }
  return "passthrough";
}

std::string_view violation_name(Violation::Kind kind) noexcept {
  switch (kind) {
    case Violation::Kind::DanglingImport: return "DanglingImport";
    case Violation::Kind::DanglingMeshEndpoint: return "DanglingMeshEndpoint";
    case Violation::Kind::DanglingProxy: return "DanglingProxy";
    case Violation::Kind::MemoryBounds: return "MemoryBounds";
    case Violation::Kind::SandboxCap: return "SandboxCap";
    case Violation::Kind::DuplicateService: return "DuplicateService";
    case Violation::Kind::DuplicateEdge: return "DuplicateEdge";
    case Violation::Kind::BadName: return "BadName";
    case Violation::Kind::BadPolicy: return "BadPolicy";
    case Violation::Kind::MissingImage: return "MissingImage";
  }
  return "Unknown";
}

bool is_valid_service_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '.' || c == '-';
  });
}

const ServiceDescriptor* Manifest::find(std::string_view name) const noexcept {
  for (const auto& s : services) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

Manifest parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::Syntax, e.what());
  }
  if (!doc.is_object()) throw SchemaError("", "expected a JSON object");
  reject_unknown_keys(doc, "", {"services", "mesh", "allowlist"});

  Manifest m;
  const json& services = require(doc, "", "services");
  if (!services.is_array()) throw SchemaError("/services", "expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < services.size(); ++i) {
    const std::string path = child("/services", i);
    ServiceDescriptor d = parse_service(services[i], path);
    if (!names.insert(d.name).second) {
      throw SchemaError(child(path, "name"),
                        "duplicate service name \"" + d.name + "\"");
    }
    m.services.push_back(std::move(d));
  }

  const json& mesh = require(doc, "", "mesh");
  if (!mesh.is_array()) throw SchemaError("/mesh", "expected an array");
  std::set<std::pair<std::string, std::string>> edges;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const std::string path = child("/mesh", i);
    MeshPolicy p = parse_policy(mesh[i], path);
    if (!edges.emplace(p.caller, p.callee).second) {
      throw SchemaError(path, "duplicate policy for edge " + p.caller +
                                  " -> " + p.callee);
    }
    m.mesh.push_back(std::move(p));
  }

  m.allowlist = as_string_array(require(doc, "", "allowlist"), "/allowlist");
  return m;
}

std::string serialize_manifest(const Manifest& manifest) {
  json services = json::array();
  for (const auto& s : manifest.services) {
    json obj = {{"name", s.name},
                {"kind", std::string(kind_name(s.kind))},
                {"memory_bytes", s.memory_bytes},
                {"max_memory_bytes", s.max_memory_bytes},
                {"toolchain", s.toolchain},
                {"imports", s.imports}};
    if (s.kind == ServiceKind::Sandboxed || !s.image.empty()) {
      obj["image"] = s.image;
    }
    services.push_back(std::move(obj));
  }
  json mesh = json::array();
  for (const auto& p : manifest.mesh) {
    json obj = {{"caller", p.caller},
                {"callee", p.callee},
                {"policy", std::string(mesh_mode_name(p.mode))}};
    if (p.mode != MeshMode::Passthrough) obj["proxy"] = p.proxy;
    if (p.mode == MeshMode::ElideAfter) obj["elide_after"] = p.elide_after;
    mesh.push_back(std::move(obj));
  }
  json doc = {{"services", std::move(services)},
              {"mesh", std::move(mesh)},
              {"allowlist", manifest.allowlist}};
  return doc.dump(2);
}

Manifest load_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(Errc::Io, "cannot read manifest " + path.string());
  return parse_manifest(buf.str());
}

std::vector<Violation> validate_manifest(const Manifest& manifest) {
  std::vector<Violation> out;
  auto add = [&out](Violation::Kind kind, std::string subject,
                    std::string path, std::string message) {
    out.push_back(Violation{kind, std::move(subject), std::move(path),
                            std::move(message)});
  };

  std::set<std::string> names;
  for (std::size_t i = 0; i < manifest.services.size(); ++i) {
    const auto& s = manifest.services[i];
    const std::string path = child("/services", i);
    if (!is_valid_service_name(s.name)) {
      add(Violation::Kind::BadName, s.name, child(path, "name"),
          "service name must match [a-z0-9_.-]+");
    }
    if (!names.insert(s.name).second) {
      add(Violation::Kind::DuplicateService, s.name, child(path, "name"),
          "duplicate service name");
    }
    if (s.memory_bytes > s.max_memory_bytes) {
      add(Violation::Kind::MemoryBounds, s.name, child(path, "memory_bytes"),
          "memory_bytes exceeds max_memory_bytes");
    }
    if (s.kind == ServiceKind::Sandboxed &&
        s.max_memory_bytes > kSandboxMemoryCap) {
      add(Violation::Kind::SandboxCap, s.name,
          child(path, "max_memory_bytes"), "exceeds 4 GiB cap");
    }
    if (s.kind == ServiceKind::Sandboxed && s.image.empty()) {
      add(Violation::Kind::MissingImage, s.name, child(path, "image"),
          "sandboxed service needs an image");
    }
  }

  auto declared = [&manifest](std::string_view name) {
    return manifest.find(name) != nullptr;
  };
  for (std::size_t i = 0; i < manifest.services.size(); ++i) {
    const auto& s = manifest.services[i];
    for (std::size_t j = 0; j < s.imports.size(); ++j) {
      if (!declared(s.imports[j])) {
        add(Violation::Kind::DanglingImport, s.imports[j],
            child(child(child("/services", i), "imports"), j),
            "service " + s.name + " imports undeclared service " +
                s.imports[j]);
      }
    }
  }

  std::set<std::pair<std::string, std::string>> edges;
  for (std::size_t i = 0; i < manifest.mesh.size(); ++i) {
    const auto& p = manifest.mesh[i];
    const std::string path = child("/mesh", i);
    if (!declared(p.caller)) {
      add(Violation::Kind::DanglingMeshEndpoint, p.caller,
          child(path, "caller"), "undeclared mesh caller " + p.caller);
    }
    if (!declared(p.callee)) {
      add(Violation::Kind::DanglingMeshEndpoint, p.callee,
          child(path, "callee"), "undeclared mesh callee " + p.callee);
    }
    if (p.mode != MeshMode::Passthrough && !declared(p.proxy)) {
      add(Violation::Kind::DanglingProxy, p.proxy, child(path, "proxy"),
          "undeclared mesh proxy " + p.proxy);
    }
    if (p.mode == MeshMode::ElideAfter && p.elide_after < 1) {
      add(Violation::Kind::BadPolicy, p.caller, child(path, "elide_after"),
          "elide_after must be >= 1");
    }
    if (!edges.emplace(p.caller, p.callee).second) {
      add(Violation::Kind::DuplicateEdge, p.caller, path,
          "duplicate policy for edge " + p.caller + " -> " + p.callee);
    }
  }
  return out;
}

bool verify_provenance(const ServiceDescriptor& service,
                       std::span<const std::string> allowlist) noexcept {
  return std::find(allowlist.begin(), allowlist.end(), service.toolchain) !=
         allowlist.end();
}

}  // namespace meshwa
