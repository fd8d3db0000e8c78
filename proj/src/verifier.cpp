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

#include <algorithm>
#include <set>

#include "meshwa/msb.hpp"

namespace meshwa::msb {
namespace {

struct StackEffect {
  std::uint32_t pops;
  std::uint32_t pushes;
};

StackEffect effect_of(const Instr& ins, const ModuleImage& m,
                      const std::vector<ImportSignature>& imports) {
  switch (ins.op) {
    case Opcode::Const:
    case Opcode::LocalGet:
    case Opcode::MemSize:
      return {0, 1};
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Xor:
    case Opcode::Eq:
    case Opcode::LtS:
      return {2, 1};
    case Opcode::Load:
    case Opcode::MemGrow:
      return {1, 1};
    case Opcode::Store:
      return {2, 0};
    case Opcode::LocalSet:
    case Opcode::BrIf:
      return {1, 0};
    case Opcode::Br:
    case Opcode::Ret:
      return {0, 0};
    case Opcode::Call: {
      const auto& callee = m.functions[static_cast<std::size_t>(ins.operand)];
      return {callee.nargs, callee.nrets};
    }
    case Opcode::CallImport: {
      const auto& sig = imports[static_cast<std::size_t>(ins.operand)];
      return {sig.nargs, sig.nrets};
    }
  }
  return {0, 0};
}

void check_operands(const ModuleImage& m, std::uint32_t f) {
  const auto& body = m.functions[f];
  const auto n = static_cast<std::int64_t>(body.code.size());
  const std::int64_t nlocals = std::int64_t{body.nargs} + body.nlocals;
  for (std::uint32_t pc = 0; pc < body.code.size(); ++pc) {
    const Instr& ins = body.code[pc];
    switch (ins.op) {
      case Opcode::Br:
      case Opcode::BrIf:
        if (ins.operand < 0 || ins.operand >= n) {
          throw VerifyError('a', f, pc,
                            "branch target " + std::to_string(ins.operand) +
                                " outside [0, " + std::to_string(n) + ")");
        }
        break;
      case Opcode::Call:
        if (ins.operand < 0 ||
            ins.operand >= static_cast<std::int64_t>(m.functions.size())) {
          throw VerifyError('b', f, pc,
                            "call target " + std::to_string(ins.operand) +
                                " is not a function");
        }
        break;
      case Opcode::CallImport:
        if (ins.operand < 0 ||
            ins.operand >= static_cast<std::int64_t>(m.imports.size())) {
          throw VerifyError('c', f, pc,
                            "import index " + std::to_string(ins.operand) +
                                " is not an import");
        }
        break;
      case Opcode::LocalGet:
      case Opcode::LocalSet:
        if (ins.operand < 0 || ins.operand >= nlocals) {
          throw VerifyError('d', f, pc,
                            "local " + std::to_string(ins.operand) +
                                " outside [0, " + std::to_string(nlocals) +
                                ")");
        }
        break;
      default:
        break;
    }
  }
}

}  // namespace

VerifiedModule verify_module(ModuleImage image) {
  const ModuleImage& m = image;
  if (m.version != 1) {
    throw VerifyError('f', 0, 0, "unsupported version");
  }
  if (m.max_pages > kMaxPages) {
    throw VerifyError('f', 0, 0, "max_pages exceeds 4 GiB");
  }
  if (m.mem_pages > m.max_pages) {
    throw VerifyError('f', 0, 0, "mem_pages exceeds max_pages");
  }
  if (m.imports.size() > kMaxImports || m.functions.size() > kMaxFunctions ||
      m.exports.size() > kMaxExports) {
    throw VerifyError('f', 0, 0, "table size over cap");
  }
  std::vector<ImportSignature> imports;
  imports.reserve(m.imports.size());
  for (const auto& name : m.imports) {
    try {
      imports.push_back(parse_import_name(name));
    } catch (const Error& e) {
      throw VerifyError('f', 0, 0, e.what());
    }
  }
  std::set<std::string_view> export_names;
  for (const auto& e : m.exports) {
    if (e.function >= m.functions.size()) {
      throw VerifyError('f', e.function, 0,
                        "export \"" + e.name + "\" names a missing function");
    }
    if (!export_names.insert(e.name).second) {
      throw VerifyError('f', e.function, 0,
                        "duplicate export \"" + e.name + "\"");
    }
  }
  for (std::uint32_t f = 0; f < m.functions.size(); ++f) {
    const auto& body = m.functions[f];
    if (body.nrets > 1) throw VerifyError('f', f, 0, "more than one result");
    if (body.code.empty()) throw VerifyError('f', f, 0, "empty body");
    if (body.code.size() > kMaxInstructions) {
      throw VerifyError('f', f, 0, "body over instruction cap");
    }
    check_operands(m, f);
  }

  VerifiedModule out;
  out.depths_.resize(m.functions.size());
  out.max_depth_.resize(m.functions.size(), 0);
  std::vector<std::uint32_t> worklist;
  for (std::uint32_t f = 0; f < m.functions.size(); ++f) {
    const auto& body = m.functions[f];
    const auto n = static_cast<std::uint32_t>(body.code.size());
    auto& depth = out.depths_[f];
    depth.assign(n, VerifiedModule::kUnreachable);
    std::uint32_t max_depth = 0;

    auto flow = [&](std::uint32_t from, std::uint32_t to, std::int32_t d) {
      if (to >= n) {
        throw VerifyError('e', f, from, "control falls off the end");
      }
      if (depth[to] == VerifiedModule::kUnreachable) {
        depth[to] = d;
        worklist.push_back(to);
      } else if (depth[to] != d) {
        throw VerifyError('e', f, to,
                          "inconsistent stack depth " +
                              std::to_string(depth[to]) + " vs " +
                              std::to_string(d));
      }
    };

    worklist.clear();
    depth[0] = 0;
    worklist.push_back(0);
    while (!worklist.empty()) {
      const std::uint32_t pc = worklist.back();
      worklist.pop_back();
      const Instr& ins = body.code[pc];
      const std::int32_t d = depth[pc];
      const StackEffect fx = effect_of(ins, m, imports);
      if (static_cast<std::uint32_t>(d) < fx.pops) {
        throw VerifyError('e', f, pc,
                          std::string(opcode_name(ins.op)) +
                              " pops from an empty stack");
      }
      const std::int32_t next = d - static_cast<std::int32_t>(fx.pops) +
                                static_cast<std::int32_t>(fx.pushes);
      max_depth = std::max({max_depth, static_cast<std::uint32_t>(d),
                            static_cast<std::uint32_t>(next)});
      switch (ins.op) {
        case Opcode::Ret:
          if (d != body.nrets) {
            throw VerifyError('e', f, pc,
                              "ret at depth " + std::to_string(d) +
                                  ", expected " + std::to_string(body.nrets));
          }
          break;
        case Opcode::Br:
          flow(pc, static_cast<std::uint32_t>(ins.operand), next);
          break;
        case Opcode::BrIf:
          flow(pc, static_cast<std::uint32_t>(ins.operand), next);
          flow(pc, pc + 1, next);
          break;
        default:
          flow(pc, pc + 1, next);
          break;
      }
    }
    out.max_depth_[f] = max_depth;
  }
  out.imports_ = std::move(imports);
  out.image_ = std::move(image);
  return out;
}

}  // namespace meshwa::msb
