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

#include <cstring>
#include <mutex>
#include <set>

#include "meshwa/msb.hpp"

namespace meshwa::msb {
namespace {

thread_local std::uint32_t t_call_depth = 0;

// Regions bound to a live instance; an instance holds its region alone.
std::mutex g_claims_mu;
std::set<const std::byte*>& claims() {
  static std::set<const std::byte*> set;
  return set;
}

struct Frame {
  std::uint32_t function;
  std::uint32_t pc;
  std::uint32_t base;  // first local slot in the value stack
};

// Per-thread value/frame stacks, one pair per nesting level so host calls
// can re-enter the interpreter.
struct StackSet {
  std::unique_ptr<Value[]> values{new Value[kStackCap]};
  std::vector<Frame> frames;
};

thread_local std::vector<std::unique_ptr<StackSet>> t_stacks;
thread_local std::size_t t_stack_level = 0;

class StackLease {
 public:
  StackLease() {
    if (t_stack_level == t_stacks.size()) {
      t_stacks.push_back(std::make_unique<StackSet>());
      t_stacks.back()->frames.reserve(16);
    }
    set_ = t_stacks[t_stack_level++].get();
    set_->frames.clear();
  }
  ~StackLease() { --t_stack_level; }
  StackSet& operator*() const { return *set_; }

 private:
  StackSet* set_;
};

class DepthRestore {
 public:
  DepthRestore() : saved_(t_call_depth) {}
  ~DepthRestore() { t_call_depth = saved_; }

 private:
  std::uint32_t saved_;
};

}  // namespace

std::uint32_t current_call_depth() noexcept { return t_call_depth; }

CallDepthScope::CallDepthScope() {
  if (t_call_depth >= kCallDepthCap) throw HostTrap{TrapKind::CallDepthExceeded};
  ++t_call_depth;
}

CallDepthScope::~CallDepthScope() { --t_call_depth; }

ServiceInstance instantiate(std::shared_ptr<const VerifiedModule> module,
                            std::vector<HostFunction> bindings,
                            const sasmem::Region& region,
                            std::span<std::byte> memory) {
  const ModuleImage& image = module->image();
  if (bindings.size() != image.imports.size()) {
    throw Error(Errc::BindingArity,
                "module has " + std::to_string(image.imports.size()) +
                    " imports, binding table has " +
                    std::to_string(bindings.size()) + " slots");
  }
  const std::uint64_t need = std::uint64_t{image.max_pages} * kPageSize;
  if (region.length < need || memory.size() < need ||
      memory.size() != region.length) {
    throw Error(Errc::RegionTooSmall,
                "region of " + std::to_string(region.length) +
                    " bytes cannot hold " + std::to_string(image.max_pages) +
                    " pages");
  }
  {
    std::lock_guard<std::mutex> lock(g_claims_mu);
    if (!claims().insert(memory.data()).second) {
      throw Error(Errc::RegionInUse,
                  "region of " + region.owner + " is bound to another instance");
    }
  }
  ServiceInstance inst;
  inst.module_ = std::move(module);
  inst.bindings_ = std::move(bindings);
  inst.region_ = region;
  inst.base_ = memory.data();
  inst.cur_pages_ = image.mem_pages;
  std::memset(inst.base_, 0, static_cast<std::size_t>(inst.cur_bytes()));
  return inst;
}

ServiceInstance::ServiceInstance(ServiceInstance&& other) noexcept
    : module_(std::move(other.module_)),
      bindings_(std::move(other.bindings_)),
      region_(std::move(other.region_)),
      base_(std::exchange(other.base_, nullptr)),
      cur_pages_(other.cur_pages_) {}

ServiceInstance& ServiceInstance::operator=(ServiceInstance&& other) noexcept {
  if (this != &other) {
    release_claim();
    module_ = std::move(other.module_);
    bindings_ = std::move(other.bindings_);
    region_ = std::move(other.region_);
    base_ = std::exchange(other.base_, nullptr);
    cur_pages_ = other.cur_pages_;
  }
  return *this;
}

ServiceInstance::~ServiceInstance() { release_claim(); }

void ServiceInstance::release_claim() noexcept {
  if (base_ == nullptr) return;
  std::lock_guard<std::mutex> lock(g_claims_mu);
  claims().erase(base_);
  base_ = nullptr;
}

void ServiceInstance::rebind_import(std::size_t index, HostFunction fn) {
  bindings_.at(index) = std::move(fn);
}

std::int64_t ServiceInstance::mem_grow(std::int64_t delta_pages) {
  const std::uint32_t max = module_->image().max_pages;
  if (delta_pages < 0 || delta_pages > std::int64_t{max} - cur_pages_) {
    return -1;
  }
  const std::uint32_t previous = cur_pages_;
  const auto delta = static_cast<std::uint32_t>(delta_pages);
  std::memset(base_ + std::uint64_t{previous} * kPageSize, 0,
              static_cast<std::size_t>(std::uint64_t{delta} * kPageSize));
  cur_pages_ = previous + delta;
  return previous;
}

InvokeResult ServiceInstance::invoke(std::string_view export_name,
                                     std::span<const Value> args,
                                     const InvokeOptions& options) {
  const Export* e = module_->image().find_export(export_name);
  if (e == nullptr) {
    throw Error(Errc::ExportNotFound,
                "no export \"" + std::string(export_name) + "\"");
  }
  return invoke_function(e->function, args, options);
}

InvokeResult ServiceInstance::invoke_function(std::uint32_t function,
                                              std::span<const Value> args,
                                              const InvokeOptions& options) {
  const ModuleImage& image = module_->image();
  const auto& functions = image.functions;
  if (function >= functions.size()) {
    throw Error(Errc::ExportNotFound,
                "no function " + std::to_string(function));
  }
  if (args.size() != functions[function].nargs) {
    throw Error(Errc::ArityMismatch,
                "function expects " +
                    std::to_string(functions[function].nargs) +
                    " arguments, got " + std::to_string(args.size()));
  }
  if (args.size() > kStackCap) return {std::nullopt, TrapKind::StackOverflow};

  StackLease lease;
  Value* const stack = (*lease).values.get();
  std::vector<Frame>& frames = (*lease).frames;
  DepthRestore depth_restore;
  AccessObserver* const observer = options.observer;
  std::uint64_t fuel = options.fuel;

  std::uint32_t sp = 0;
  for (Value v : args) stack[sp++] = v;

  std::uint32_t fn = 0;
  std::uint32_t pc = 0;
  std::uint32_t base = 0;
  const Instr* code = nullptr;

  // Pushes a frame for `callee` whose arguments sit on top of the stack.
  auto enter = [&](std::uint32_t callee) -> std::optional<TrapKind> {
    const FunctionBody& body = functions[callee];
    const std::uint32_t new_base = sp - body.nargs;
    const std::uint64_t need = std::uint64_t{new_base} + body.nargs +
                               body.nlocals + module_->max_depth(callee);
    if (t_call_depth >= kCallDepthCap) return TrapKind::CallDepthExceeded;
    if (need > kStackCap) return TrapKind::StackOverflow;
    ++t_call_depth;
    for (std::uint32_t i = 0; i < body.nlocals; ++i) stack[sp++] = 0;
    frames.push_back(Frame{callee, 0, new_base});
    fn = callee;
    pc = 0;
    base = new_base;
    code = body.code.data();
    return std::nullopt;
  };

  auto trap = [](TrapKind k) { return InvokeResult{std::nullopt, k}; };

  if (auto t = enter(function)) return trap(*t);

  for (;;) {
    if (fuel-- == 0) return trap(TrapKind::OutOfFuel);
    const Instr& ins = code[pc];
    switch (ins.op) {
      case Opcode::Const:
        stack[sp++] = ins.operand;
        break;
#define MESHWA_BINOP(OP, EXPR)                                  \
  case Opcode::OP: {                                            \
    const auto b = static_cast<std::uint64_t>(stack[--sp]);     \
    const auto a = static_cast<std::uint64_t>(stack[sp - 1]);   \
    stack[sp - 1] = static_cast<Value>(EXPR);                   \
    break;                                                      \
  }
        MESHWA_BINOP(Add, a + b)
        MESHWA_BINOP(Sub, a - b)
        MESHWA_BINOP(Mul, a * b)
        MESHWA_BINOP(And, a & b)
        MESHWA_BINOP(Or, a | b)
        MESHWA_BINOP(Xor, a ^ b)
        MESHWA_BINOP(Eq, a == b ? 1 : 0)
#undef MESHWA_BINOP
      case Opcode::LtS: {
        const Value b = stack[--sp];
        stack[sp - 1] = stack[sp - 1] < b ? 1 : 0;
        break;
      }
      case Opcode::Load: {
        const Value addr = stack[sp - 1];
        const std::uint64_t limit = cur_bytes();
        if (addr < 0 || limit < 8 ||
            static_cast<std::uint64_t>(addr) > limit - 8) {
          return trap(TrapKind::OutOfBounds);
        }
        const std::byte* p = base_ + addr;
        if (observer != nullptr) observer->on_access(p, 8, false);
        Value v;
        std::memcpy(&v, p, 8);
        stack[sp - 1] = v;
        break;
      }
      case Opcode::Store: {
        const Value value = stack[--sp];
        const Value addr = stack[--sp];
        const std::uint64_t limit = cur_bytes();
        if (addr < 0 || limit < 8 ||
            static_cast<std::uint64_t>(addr) > limit - 8) {
          return trap(TrapKind::OutOfBounds);
        }
        std::byte* p = base_ + addr;
        if (observer != nullptr) observer->on_access(p, 8, true);
        std::memcpy(p, &value, 8);
        break;
      }
      case Opcode::LocalGet:
        stack[sp++] = stack[base + static_cast<std::uint32_t>(ins.operand)];
        break;
      case Opcode::LocalSet:
        stack[base + static_cast<std::uint32_t>(ins.operand)] = stack[--sp];
        break;
      case Opcode::Br:
        pc = static_cast<std::uint32_t>(ins.operand);
        continue;
      case Opcode::BrIf:
        if (stack[--sp] != 0) {
          pc = static_cast<std::uint32_t>(ins.operand);
          continue;
        }
        break;
      case Opcode::Call: {
        frames.back().pc = pc;
        if (auto t = enter(static_cast<std::uint32_t>(ins.operand))) {
          return trap(*t);
        }
        continue;
      }
      case Opcode::CallImport: {
        const auto index = static_cast<std::size_t>(ins.operand);
        const ImportSignature& sig = module_->imports()[index];
        std::span<const Value> host_args(stack + sp - sig.nargs, sig.nargs);
        std::optional<Value> result;
        try {
          result = bindings_[index](*this, host_args);
        } catch (const HostTrap& t) {
          return trap(t.kind);
        }
        sp -= sig.nargs;
        if (sig.nrets != 0) stack[sp++] = result.value_or(0);
        break;
      }
      case Opcode::Ret: {
        const FunctionBody& body = functions[fn];
        const Value result = body.nrets != 0 ? stack[sp - 1] : 0;
        sp = base;
        frames.pop_back();
        --t_call_depth;
        if (frames.empty()) {
          return body.nrets != 0 ? InvokeResult{result, std::nullopt}
                                 : InvokeResult{};
        }
        if (body.nrets != 0) stack[sp++] = result;
        const Frame& caller = frames.back();
        fn = caller.function;
        pc = caller.pc;
        base = caller.base;
        code = functions[fn].code.data();
        break;
      }
      case Opcode::MemSize:
        stack[sp++] = cur_pages_;
        break;
      case Opcode::MemGrow:
        stack[sp - 1] = mem_grow(stack[sp - 1]);
        break;
    }
    ++pc;
  }
}

}  // namespace meshwa::msb
