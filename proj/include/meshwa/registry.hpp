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

#ifndef MESHWA_REGISTRY_HPP_
#define MESHWA_REGISTRY_HPP_

// Discovery: services register their exports, callers look peers up by
// name and get back a caller-private function table. After discovery all
// communication is a call through a table slot.

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshwa/manifest.hpp"
#include "meshwa/service.hpp"

namespace meshwa {

// (Object, Object) -> DirectCall. Anything involving a region-granular
// side goes through proxies, or copies when force_copy is set.
BindingMode negotiate(SafetyClass caller, SafetyClass callee,
                      bool force_copy = false) noexcept;

struct ServiceEntry {
  std::string name;
  SafetyClass cls = SafetyClass::ObjectGranular;
  std::vector<std::string> exports;
  std::shared_ptr<Service> impl;
  std::atomic<bool> alive{true};
  // One invocation at a time; re-entrant on the owning thread.
  std::recursive_mutex gate;

  std::optional<std::uint32_t> export_index(std::string_view name) const;
};

struct CallEnv;

class SlotTarget {
 public:
  virtual ~SlotTarget() = default;
  virtual std::optional<Value> dispatch(const CallEnv& env) const = 0;
  virtual std::string_view kind() const noexcept = 0;
};

// Plain call into the callee's export. Fails with ServiceGone once the
// callee is unregistered.
class DirectTarget final : public SlotTarget {
 public:
  DirectTarget(std::shared_ptr<ServiceEntry> callee, std::uint32_t export_index,
               BindingMode binding)
      : callee_(std::move(callee)),
        export_index_(export_index),
        binding_(binding) {}

  std::optional<Value> dispatch(const CallEnv& env) const override;
  std::string_view kind() const noexcept override { return "direct"; }

  ServiceEntry& callee() const noexcept { return *callee_; }
  std::uint32_t export_index() const noexcept { return export_index_; }
  BindingMode binding() const noexcept { return binding_; }

 private:
  std::shared_ptr<ServiceEntry> callee_;
  std::uint32_t export_index_;
  BindingMode binding_;
};

struct TableSlot {
  TableSlot(std::string name, BindingMode mode, const DirectTarget* d)
      : export_name(std::move(name)), binding(mode), direct(d), target(d) {}

  const std::string export_name;
  const BindingMode binding;
  const DirectTarget* const direct;
  std::atomic<const SlotTarget*> target;

  const SlotTarget* load() const noexcept {
    return target.load(std::memory_order_acquire);
  }
};

class FunctionTable {
 public:
  const std::string& owner() const noexcept { return owner_; }
  const std::string& target() const noexcept { return target_; }
  std::size_t size() const noexcept { return slots_.size(); }
  TableSlot& slot(std::size_t index) { return slots_.at(index); }
  const TableSlot& slot(std::size_t index) const { return slots_.at(index); }
  std::optional<std::size_t> find(std::string_view export_name) const;

  // Swaps the dispatch target; slot name and index are fixed.
  void rewrite(std::size_t index, const SlotTarget* target) {
    slots_.at(index).target.store(target, std::memory_order_release);
  }

 private:
  friend class Registry;
  FunctionTable(std::string owner, std::string target)
      : owner_(std::move(owner)), target_(std::move(target)) {}

  std::string owner_;
  std::string target_;
  std::deque<TableSlot> slots_;
  std::vector<std::unique_ptr<DirectTarget>> directs_;
  std::shared_ptr<ServiceEntry> callee_;
};

class Registry {
 public:
  explicit Registry(bool force_copy = false) : force_copy_(force_copy) {}

  void register_service(std::string name, std::shared_ptr<Service> impl,
                        std::vector<std::string> exports, SafetyClass cls);

  // Returns the caller's table for target, creating it on first use.
  // Repeated discovery returns the same table object.
  FunctionTable& discover(std::string_view caller, std::string_view target);

  // Waits for in-flight calls into the service, then poisons every table
  // pointing at it.
  void unregister(std::string_view name);

  std::shared_ptr<ServiceEntry> find(std::string_view name) const;
  std::vector<std::string> names() const;

  bool force_copy() const noexcept { return force_copy_.load(); }
  // Applies to tables created afterwards.
  void set_force_copy(bool value) noexcept { force_copy_.store(value); }

  // {"services":[...], "tables":[...]}
  std::string dump_json() const;

 private:
  using TableKey = std::pair<std::string, std::string>;

  mutable std::shared_mutex mu_;
  std::atomic<bool> force_copy_;
  std::map<std::string, std::shared_ptr<ServiceEntry>, std::less<>> services_;
  std::map<TableKey, std::unique_ptr<FunctionTable>> tables_;
  // Tables whose callee went away; kept so stale references stay valid.
  std::vector<std::unique_ptr<FunctionTable>> retired_;
};

}  // namespace meshwa

#endif  // MESHWA_REGISTRY_HPP_
