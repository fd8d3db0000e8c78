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

#ifndef MESHWA_XCALL_HPP_
#define MESHWA_XCALL_HPP_

// Cross-service invocation through function-table slots.

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshwa/ledger.hpp"
#include "meshwa/registry.hpp"
#include "meshwa/service.hpp"

namespace meshwa {

struct CallEnv {
  Xcall& xcall;
  std::string_view caller;
  const FunctionTable& table;
  std::size_t slot_index;
  std::span<const Value> args;
  std::optional<ObjectHandle> payload;
};

struct CallRecord {
  std::string caller;
  std::string callee;
  std::string export_name;
  BindingMode binding = BindingMode::DirectCall;
  std::uint64_t payload_bytes = 0;
  std::uint64_t start_ns = 0;  // steady clock
  std::uint64_t end_ns = 0;
};

inline constexpr std::string_view kCallRecordCsvHeader =
    "caller,callee,export,binding,payload_bytes,latency_ns";

class CallRecorder {
 public:
  explicit CallRecorder(std::size_t capacity = std::size_t{1} << 20)
      : capacity_(capacity) {}

  void set_enabled(bool on) noexcept { enabled_.store(on); }
  bool enabled() const noexcept { return enabled_.load(std::memory_order_relaxed); }
  void add(CallRecord record);
  std::vector<CallRecord> snapshot() const;
  std::uint64_t dropped() const;
  void clear();
  std::string csv() const;

 private:
  std::atomic<bool> enabled_{true};
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
  std::uint64_t dropped_ = 0;
};

std::uint64_t monotonic_ns() noexcept;

enum class PayloadAccess : std::uint8_t { ReadWrite, ReadOnly };

class Xcall {
 public:
  Xcall(Registry& registry, Ledger& ledger)
      : registry_(registry), ledger_(ledger) {}

  // Calls slot `slot` of `table` on behalf of `caller`, which must own the
  // table. A payload, when given, must be accessible to the caller; the
  // callee sees it according to the slot's binding mode. Callee traps
  // surface as Error{CalleeTrapped} carrying the trap kind.
  std::optional<Value> call(std::string_view caller, FunctionTable& table,
                            std::size_t slot, std::span<const Value> args,
                            std::optional<ObjectHandle> payload = std::nullopt);

  // One invocation of callee's export with payload staging for `mode`.
  std::optional<Value> invoke(ServiceEntry& callee, std::uint32_t export_index,
                              BindingMode mode, std::string_view caller,
                              std::span<const Value> args,
                              std::optional<ObjectHandle> payload,
                              PayloadAccess access = PayloadAccess::ReadWrite,
                              const Interception* interception = nullptr);

  Registry& registry() noexcept { return registry_; }
  Ledger& ledger() noexcept { return ledger_; }
  CallRecorder& recorder() noexcept { return recorder_; }

 private:
  Registry& registry_;
  Ledger& ledger_;
  CallRecorder recorder_;
};

}  // namespace meshwa

#endif  // MESHWA_XCALL_HPP_
