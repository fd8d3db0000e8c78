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

#ifndef MESHWA_MSB_HPP_
#define MESHWA_MSB_HPP_

// Minimal Service Bytecode: a region-granular sandbox format with one
// linear memory, explicit bounds checks and statically verified control
// flow. Binary layout (little-endian):
//
//   "MSB1" u32 version u32 mem_pages u32 max_pages
//   u32 import_count  { u16 len, name }*
//   u32 func_count    { u8 nargs, u8 nrets, u8 nlocals, u32 ninstr,
//                       { u8 opcode, i64 operand }* }*
//   u32 export_count  { u16 len, name, u32 func_idx }*
//
// Import names carry their signature: "<service>.<export>/<nargs>:<nrets>",
// e.g. "echo.echo/2:1" or "proxy.read/4:1".

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshwa/error.hpp"
#include "meshwa/sasmem.hpp"

namespace meshwa::msb {

using Value = std::int64_t;

inline constexpr std::uint64_t kPageSize = 65536;
inline constexpr std::uint32_t kMaxPages = 65536;  // 4 GiB
inline constexpr std::size_t kStackCap = 4096;     // values per invocation
inline constexpr std::uint32_t kCallDepthCap = 512;
inline constexpr std::uint8_t kMaxImportArgs = 8;

// Decoder caps.
inline constexpr std::uint32_t kMaxImports = 1024;
inline constexpr std::uint32_t kMaxFunctions = 65536;
inline constexpr std::uint32_t kMaxInstructions = 1u << 20;
inline constexpr std::uint32_t kMaxExports = 65536;

enum class Opcode : std::uint8_t {
  Const = 0x01,
  Add = 0x02,
  Sub = 0x03,
  Mul = 0x04,
  And = 0x05,
  Or = 0x06,
  Xor = 0x07,
  Eq = 0x08,
  LtS = 0x09,
  Load = 0x0A,
  Store = 0x0B,
  LocalGet = 0x0C,
  LocalSet = 0x0D,
  Br = 0x0E,
  BrIf = 0x0F,
  Call = 0x10,
  CallImport = 0x11,
  Ret = 0x12,
  MemSize = 0x13,
  MemGrow = 0x14,
};

constexpr bool is_opcode(std::uint8_t byte) noexcept {
  return byte >= 0x01 && byte <= 0x14;
}

std::string_view opcode_name(Opcode op) noexcept;

struct Instr {
  Opcode op = Opcode::Ret;
  std::int64_t operand = 0;

  bool operator==(const Instr&) const = default;
};

struct FunctionBody {
  std::uint8_t nargs = 0;
  std::uint8_t nrets = 0;
  std::uint8_t nlocals = 0;
  std::vector<Instr> code;

  bool operator==(const FunctionBody&) const = default;
};

struct Export {
  std::string name;
  std::uint32_t function = 0;

  bool operator==(const Export&) const = default;
};

struct ImportSignature {
  std::string target;  // service name, or "proxy"
  std::string field;   // export name
  std::uint8_t nargs = 0;
  std::uint8_t nrets = 0;
};

// Throws Error{BadImport} when the name does not carry a signature.
ImportSignature parse_import_name(std::string_view name);

struct ModuleImage {
  std::uint32_t version = 1;
  std::uint32_t mem_pages = 0;
  std::uint32_t max_pages = 0;
  std::vector<std::string> imports;
  std::vector<FunctionBody> functions;
  std::vector<Export> exports;  // declaration order

  const Export* find_export(std::string_view name) const noexcept;
  bool operator==(const ModuleImage&) const = default;
};

ModuleImage decode_module(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_module(const ModuleImage& image);

// A ModuleImage that passed every verifier rule, annotated with the
// static operand-stack depth at entry to each instruction.
class VerifiedModule {
 public:
  static constexpr std::int32_t kUnreachable = -1;

  const ModuleImage& image() const noexcept { return image_; }
  const std::vector<ImportSignature>& imports() const noexcept {
    return imports_;
  }
  std::span<const std::int32_t> entry_depths(std::uint32_t function) const {
    return depths_.at(function);
  }
  std::uint32_t max_depth(std::uint32_t function) const {
    return max_depth_.at(function);
  }

 private:
  friend VerifiedModule verify_module(ModuleImage image);
  VerifiedModule() = default;

  ModuleImage image_;
  std::vector<ImportSignature> imports_;
  std::vector<std::vector<std::int32_t>> depths_;
  std::vector<std::uint32_t> max_depth_;
};

// Rules, reported as VerifyError::rule():
//   a  br/br_if targets inside the same function
//   b  call targets < function count
//   c  call_import targets < import count
//   d  local indices < nargs + nlocals
//   e  stack discipline: one entry depth per instruction, no pop on empty,
//      depth == nrets at every ret, no fall-through past the last instruction
//   f  module limits and structure
VerifiedModule verify_module(ModuleImage image);

class ServiceInstance;

// Host side of an import. May throw meshwa::Error, which aborts the
// invocation and propagates out of invoke(), or HostTrap, which traps it.
using HostFunction = std::function<std::optional<Value>(
    ServiceInstance& caller, std::span<const Value> args)>;

struct HostTrap {
  TrapKind kind;
};

// Observes every linear-memory access after its bounds check, with the
// host address actually touched.
class AccessObserver {
 public:
  virtual ~AccessObserver() = default;
  virtual void on_access(const std::byte* address, std::size_t width,
                         bool is_store) = 0;
};

struct InvokeOptions {
  std::uint64_t fuel = UINT64_MAX;  // instructions before OutOfFuel
  AccessObserver* observer = nullptr;
};

struct InvokeResult {
  std::optional<Value> value;
  std::optional<TrapKind> trap;

  bool trapped() const noexcept { return trap.has_value(); }
};

// Depth of nested sandbox frames and cross-service calls on this thread.
std::uint32_t current_call_depth() noexcept;

// Claims one call-depth level for the lifetime of the scope.
class CallDepthScope {
 public:
  CallDepthScope();  // throws HostTrap{CallDepthExceeded} at the cap
  ~CallDepthScope();
  CallDepthScope(const CallDepthScope&) = delete;
  CallDepthScope& operator=(const CallDepthScope&) = delete;
};

class ServiceInstance {
 public:
  ServiceInstance(ServiceInstance&&) noexcept;
  ServiceInstance& operator=(ServiceInstance&&) noexcept;
  ~ServiceInstance();

  InvokeResult invoke(std::string_view export_name, std::span<const Value> args,
                      const InvokeOptions& options = {});
  InvokeResult invoke_function(std::uint32_t function,
                               std::span<const Value> args,
                               const InvokeOptions& options = {});

  // Returns the previous page count, or -1 when the grow would exceed
  // max_pages. New pages read as zero.
  std::int64_t mem_grow(std::int64_t delta_pages);

  std::uint32_t cur_pages() const noexcept { return cur_pages_; }
  std::uint64_t cur_bytes() const noexcept {
    return std::uint64_t{cur_pages_} * kPageSize;
  }
  // Accessible linear memory, [0, cur_pages * 64 KiB).
  std::span<std::byte> memory() const noexcept {
    return {base_, static_cast<std::size_t>(cur_bytes())};
  }
  const sasmem::Region& region() const noexcept { return region_; }
  const VerifiedModule& module() const noexcept { return *module_; }
  std::shared_ptr<const VerifiedModule> module_ptr() const { return module_; }

  void rebind_import(std::size_t index, HostFunction fn);

 private:
  friend ServiceInstance instantiate(std::shared_ptr<const VerifiedModule>,
                                     std::vector<HostFunction>,
                                     const sasmem::Region&,
                                     std::span<std::byte>);
  ServiceInstance() = default;
  void release_claim() noexcept;

  std::shared_ptr<const VerifiedModule> module_;
  std::vector<HostFunction> bindings_;
  sasmem::Region region_;
  std::byte* base_ = nullptr;
  std::uint32_t cur_pages_ = 0;
};

// Binds a verified module to host imports (one per import, in order) and
// to an exclusive region of at least max_pages * 64 KiB. The first
// mem_pages pages are zeroed.
ServiceInstance instantiate(std::shared_ptr<const VerifiedModule> module,
                            std::vector<HostFunction> bindings,
                            const sasmem::Region& region,
                            std::span<std::byte> memory);

}  // namespace meshwa::msb

#endif  // MESHWA_MSB_HPP_
