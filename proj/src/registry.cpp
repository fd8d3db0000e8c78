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

#include "meshwa/registry.hpp"

#include "json.hpp"
#include "meshwa/error.hpp"

namespace meshwa {

std::string_view binding_name(BindingMode mode) noexcept {
  switch (mode) {
    case BindingMode::DirectCall: return "DirectCall";
    case BindingMode::ProxyMediated: return "ProxyMediated";
    case BindingMode::CopyInOut: return "CopyInOut";
  }
  return "DirectCall";
}

BindingMode negotiate(SafetyClass caller, SafetyClass callee,
                      bool force_copy) noexcept {
  if (caller == SafetyClass::ObjectGranular &&
      callee == SafetyClass::ObjectGranular) {
    return BindingMode::DirectCall;
  }
  return force_copy ? BindingMode::CopyInOut : BindingMode::ProxyMediated;
}

std::optional<std::uint32_t> ServiceEntry::export_index(
    std::string_view export_name) const {
  for (std::uint32_t i = 0; i < exports.size(); ++i) {
    if (exports[i] == export_name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> FunctionTable::find(
    std::string_view export_name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].export_name == export_name) return i;
  }
  return std::nullopt;
}

void Registry::register_service(std::string name, std::shared_ptr<Service> impl,
                                std::vector<std::string> exports,
                                SafetyClass cls) {
  if (exports.empty()) {
    throw Error(Errc::EmptyExports, name + " declares no exports");
  }
  auto entry = std::make_shared<ServiceEntry>();
  entry->name = name;
  entry->cls = cls;
  entry->exports = std::move(exports);
  entry->impl = std::move(impl);
  std::unique_lock lock(mu_);
  if (services_.count(name) != 0) {
    throw Error(Errc::DuplicateName, name + " is already registered");
  }
  services_.emplace(std::move(name), std::move(entry));
}

FunctionTable& Registry::discover(std::string_view caller,
                                  std::string_view target) {
  TableKey key{std::string(caller), std::string(target)};
  {
    std::shared_lock lock(mu_);
    auto svc = services_.find(target);
    auto tbl = tables_.find(key);
    if (svc != services_.end() && tbl != tables_.end() &&
        tbl->second->callee_ == svc->second) {
      return *tbl->second;
    }
  }
  std::unique_lock lock(mu_);
  if (services_.find(caller) == services_.end()) {
    throw Error(Errc::UnknownCaller,
                std::string(caller) + " is not a registered service");
  }
  auto svc = services_.find(target);
  if (svc == services_.end()) {
    throw Error(Errc::NotFound,
                std::string(target) + " is not a registered service");
  }
  auto& slot = tables_[key];
  if (slot && slot->callee_ == svc->second) return *slot;
  if (slot) retired_.push_back(std::move(slot));

  const auto& callee = svc->second;
  const auto caller_cls = services_.find(caller)->second->cls;
  const BindingMode mode = negotiate(caller_cls, callee->cls, force_copy());
  std::unique_ptr<FunctionTable> table(
      new FunctionTable(key.first, key.second));
  table->callee_ = callee;
  for (std::uint32_t i = 0; i < callee->exports.size(); ++i) {
    table->directs_.push_back(std::make_unique<DirectTarget>(callee, i, mode));
    table->slots_.emplace_back(callee->exports[i], mode,
                               table->directs_.back().get());
  }
  slot = std::move(table);
  return *slot;
}

void Registry::unregister(std::string_view name) {
  std::shared_ptr<ServiceEntry> entry;
  {
    std::unique_lock lock(mu_);
    auto it = services_.find(name);
    if (it == services_.end()) {
      throw Error(Errc::UnknownService,
                  std::string(name) + " is not a registered service");
    }
    entry = it->second;
    services_.erase(it);
  }
  entry->alive.store(false);
  // Quiescence: in-flight invocations hold the gate.
  std::lock_guard<std::recursive_mutex> quiesce(entry->gate);
  entry->impl.reset();
}

std::shared_ptr<ServiceEntry> Registry::find(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = services_.find(name);
  return it == services_.end() ? nullptr : it->second;
}

std::vector<std::string> Registry::names() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, entry] : services_) out.push_back(name);
  return out;
}

std::string Registry::dump_json() const {
  using nlohmann::json;
  std::shared_lock lock(mu_);
  json services = json::array();
  for (const auto& [name, entry] : services_) {
    services.push_back({{"name", name},
                        {"class", std::string(class_name(entry->cls))},
                        {"exports", entry->exports}});
  }
  json tables = json::array();
  for (const auto& [key, table] : tables_) {
    json slots = json::array();
    for (std::size_t i = 0; i < table->size(); ++i) {
      const TableSlot& s = table->slot(i);
      slots.push_back({{"index", i},
                       {"export", s.export_name},
                       {"binding", std::string(binding_name(s.binding))},
                       {"target", std::string(s.load()->kind())}});
    }
    tables.push_back({{"owner", table->owner()},
                      {"target", table->target()},
                      {"live", table->callee_->alive.load()},
                      {"slots", std::move(slots)}});
  }
  return json{{"services", std::move(services)}, {"tables", std::move(tables)}}
      .dump(2);
}

}  // namespace meshwa
