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

#ifndef MESHWA_SERVICE_HPP_
#define MESHWA_SERVICE_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshwa/manifest.hpp"

namespace meshwa {

using Value = std::int64_t;

// How two services exchange payload data, chosen by negotiate().
enum class BindingMode : std::uint8_t { DirectCall, ProxyMediated, CopyInOut };

std::string_view binding_name(BindingMode mode) noexcept;

struct ObjectHandle {
  std::uint64_t id = 0;
  auto operator<=>(const ObjectHandle&) const = default;
};

// Callee-side view of a call's payload object.
class PayloadView {
 public:
  virtual ~PayloadView() = default;
  virtual std::uint64_t size() const = 0;
  virtual void read(std::uint64_t offset, std::span<std::byte> out) const = 0;
  virtual void write(std::uint64_t offset, std::span<const std::byte> in) = 0;
  virtual bool writable() const = 0;
};

// Present when a mesh proxy's on_call runs for an intercepted edge.
struct Interception {
  std::string_view caller;
  std::string_view callee;
  std::string_view export_name;
};

class Xcall;

struct CallFrame {
  Xcall* xcall = nullptr;
  std::string_view self;
  std::string_view caller;  // empty for operator-issued invocations
  std::span<const Value> args;
  std::optional<ObjectHandle> payload;
  PayloadView* payload_view = nullptr;
  BindingMode binding = BindingMode::DirectCall;
  // Sandboxed callees receive the payload as two leading arguments:
  // (ref, len). ref >= 0 is an offset into linear memory (CopyInOut);
  // ref < 0 is the negated proxy binding id (ProxyMediated).
  Value payload_ref = 0;
  const Interception* interception = nullptr;
};

// Something a registry entry can dispatch into.
class Service {
 public:
  virtual ~Service() = default;
  virtual std::optional<Value> call(std::uint32_t export_index,
                                    CallFrame& frame) = 0;
  // Staging area for CopyInOut payloads: the service's own memory.
  virtual std::span<std::byte> io_window() = 0;
};

using NativeFunction = std::function<std::optional<Value>(CallFrame&)>;

// Trusted in-process service made of C++ callables.
class NativeService final : public Service {
 public:
  NativeService(std::vector<NativeFunction> functions,
                std::span<std::byte> memory)
      : functions_(std::move(functions)), memory_(memory) {}

  std::optional<Value> call(std::uint32_t export_index,
                            CallFrame& frame) override {
    return functions_.at(export_index)(frame);
  }
  std::span<std::byte> io_window() override { return memory_; }

 private:
  std::vector<NativeFunction> functions_;
  std::span<std::byte> memory_;
};

}  // namespace meshwa

#endif  // MESHWA_SERVICE_HPP_
