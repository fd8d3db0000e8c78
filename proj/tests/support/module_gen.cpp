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

#include "module_gen.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <string>

namespace meshwa::testing {
namespace {

using msb::Instr;
using msb::Opcode;

constexpr std::int64_t kPage = 65536;

std::uint64_t pick(std::mt19937_64& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

bool chance(std::mt19937_64& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

struct Sig {
  std::uint32_t nargs;
  std::uint32_t nrets;
};

class BodyBuilder {
 public:
  BodyBuilder(std::mt19937_64& rng, const msb::ModuleImage& image,
              const std::vector<Sig>& funcs, const std::vector<Sig>& imports,
              std::uint32_t self)
      : rng_(rng), image_(image), funcs_(funcs), imports_(imports),
        body_(image.functions[self]), self_(self) {}

  std::vector<Instr> build(std::uint32_t length) {
    while (code_.size() < length) step();
    // Epilogue: reach nrets and return.
    settle(body_.nrets);
    emit({Opcode::Ret, 0});
    // Landing pads for forward branches that never found a target.
    std::map<std::int64_t, std::vector<std::size_t>> by_depth;
    for (const auto& p : pending_) by_depth[p.depth].push_back(p.at);
    for (const auto& [depth, sites] : by_depth) {
      for (std::size_t site : sites) code_[site].operand = static_cast<std::int64_t>(code_.size());
      depth_ = depth;
      settle(body_.nrets);
      emit({Opcode::Ret, 0});
    }
    return code_;
  }

 private:
  struct Pending {
    std::size_t at;
    std::int64_t depth;  // entry depth required at the target
  };

  void emit(Instr ins) {
    entry_depth_.push_back(depth_);
    code_.push_back(ins);
  }

  std::uint32_t local_count() const { return body_.nargs + body_.nlocals; }

  void settle(std::int64_t target) {
    while (depth_ > target) {
      emit({Opcode::LocalSet, static_cast<std::int64_t>(pick(rng_, local_count()))});
      --depth_;
    }
    while (depth_ < target) {
      emit({Opcode::Const, static_cast<std::int64_t>(pick(rng_, 100))});
      ++depth_;
    }
  }

  // After an unconditional transfer the next instruction is reachable only
  // through a pending forward branch.
  void after_jump() {
    if (pending_.empty()) return;  // unreachable tail, any depth will do
    const std::size_t i = pick(rng_, pending_.size());
    depth_ = pending_[i].depth;
    resolve_matching();
  }

  // Patches pending branches whose required depth equals the current one.
  void resolve_matching() {
    const auto here = static_cast<std::int64_t>(code_.size());
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (it->depth == depth_ && (chance(rng_, 0.6) || code_.size() > 200)) {
        code_[it->at].operand = here;
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::int64_t address() {
    return interesting_address(rng_, image_.mem_pages, image_.max_pages);
  }

  void push_value() {
    switch (pick(rng_, 4)) {
      case 0:
        emit({Opcode::Const, address()});
        break;
      case 1:
        emit({Opcode::LocalGet, static_cast<std::int64_t>(pick(rng_, local_count()))});
        break;
      case 2:
        emit({Opcode::MemSize, 0});
        break;
      default:
        emit({Opcode::Const, static_cast<std::int64_t>(pick(rng_, 16))});
        break;
    }
    ++depth_;
  }

  void step() {
    if (!pending_.empty()) resolve_matching();
    const std::uint64_t roll = pick(rng_, 100);
    if (depth_ > 6 || (depth_ > 0 && roll < 8)) {
      emit({Opcode::LocalSet, static_cast<std::int64_t>(pick(rng_, local_count()))});
      --depth_;
      return;
    }
    if (roll < 22) {
      push_value();
    } else if (roll < 34) {
      // load from a computed address
      if (depth_ == 0 || chance(rng_, 0.6)) {
        emit({Opcode::Const, address()});
        ++depth_;
      }
      emit({Opcode::Load, 0});
    } else if (roll < 46) {
      // store: address below value
      emit({Opcode::Const, address()});
      ++depth_;
      push_value();
      emit({Opcode::Store, 0});
      depth_ -= 2;
    } else if (roll < 58) {
      while (depth_ < 2) push_value();
      static constexpr Opcode kBinary[] = {Opcode::Add, Opcode::Sub, Opcode::Mul,
                                           Opcode::And, Opcode::Or,  Opcode::Xor,
                                           Opcode::Eq,  Opcode::LtS};
      emit({kBinary[pick(rng_, 8)], 0});
      --depth_;
    } else if (roll < 62) {
      if (depth_ == 0) {
        emit({Opcode::Const, static_cast<std::int64_t>(pick(rng_, 3)) - 1});
        ++depth_;
      }
      emit({Opcode::MemGrow, 0});
    } else if (roll < 70) {
      // forward br_if
      if (depth_ == 0) push_value();
      pending_.push_back({code_.size(), depth_ - 1});
      emit({Opcode::BrIf, 0});
      --depth_;
    } else if (roll < 75) {
      // backward br_if: a loop guarded by a counter-ish condition
      if (depth_ == 0) push_value();
      const std::int64_t after = depth_ - 1;
      std::vector<std::size_t> targets;
      for (std::size_t i = 0; i < code_.size(); ++i) {
        if (entry_depth_[i] == after) targets.push_back(i);
      }
      if (targets.empty()) {
        emit({Opcode::LocalSet, 0});
      } else {
        emit({Opcode::BrIf, static_cast<std::int64_t>(targets[pick(rng_, targets.size())])});
      }
      --depth_;
    } else if (roll < 78) {
      // unconditional forward br, or backward br, then continue elsewhere
      if (chance(rng_, 0.5)) {
        pending_.push_back({code_.size(), depth_});
        emit({Opcode::Br, 0});
      } else {
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < code_.size(); ++i) {
          if (entry_depth_[i] == depth_) targets.push_back(i);
        }
        if (targets.empty()) return;
        emit({Opcode::Br, static_cast<std::int64_t>(targets[pick(rng_, targets.size())])});
      }
      after_jump();
    } else if (roll < 81) {
      settle(body_.nrets);
      emit({Opcode::Ret, 0});
      after_jump();
    } else if (roll < 90) {
      // Mostly calls toward higher indices so recursion stays occasional.
      std::uint32_t callee = 0;
      if (self_ + 1 < funcs_.size() && !chance(rng_, 0.15)) {
        callee = self_ + 1 + static_cast<std::uint32_t>(pick(rng_, funcs_.size() - self_ - 1));
      } else if (chance(rng_, 0.2)) {
        callee = static_cast<std::uint32_t>(pick(rng_, funcs_.size()));
      } else {
        push_value();
        return;
      }
      while (depth_ < funcs_[callee].nargs) push_value();
      emit({Opcode::Call, callee});
      depth_ += static_cast<std::int64_t>(funcs_[callee].nrets) - funcs_[callee].nargs;
    } else if (!imports_.empty()) {
      const std::uint32_t index = static_cast<std::uint32_t>(pick(rng_, imports_.size()));
      while (depth_ < imports_[index].nargs) push_value();
      emit({Opcode::CallImport, index});
      depth_ += static_cast<std::int64_t>(imports_[index].nrets) - imports_[index].nargs;
    } else {
      push_value();
    }
  }

  std::mt19937_64& rng_;
  const msb::ModuleImage& image_;
  const std::vector<Sig>& funcs_;
  const std::vector<Sig>& imports_;
  const msb::FunctionBody& body_;
  std::uint32_t self_;
  std::vector<Instr> code_;
  std::vector<std::int64_t> entry_depth_;
  std::vector<Pending> pending_;
  std::int64_t depth_ = 0;
};

}  // namespace

std::int64_t interesting_address(std::mt19937_64& rng, std::uint32_t mem_pages,
                                 std::uint32_t max_pages) {
  const std::int64_t cur = std::int64_t{mem_pages} * kPage;
  const std::int64_t max = std::int64_t{max_pages} * kPage;
  switch (pick(rng, 12)) {
    case 0: return -8;
    case 1: return -1;
    case 2: return 0;
    case 3: return cur - 8;
    case 4: return cur - 7;
    case 5: return cur;
    case 6: return cur + kPage - 8;
    case 7: return max - 8;
    case 8: return max - 1;
    case 9:
      return chance(rng, 0.5) ? std::numeric_limits<std::int64_t>::max() - 3
                              : std::numeric_limits<std::int64_t>::min();
    case 10: return static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(max + kPage + 1)));
    default: return cur > 8 ? static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(cur - 7))) : 0;
  }
}

std::vector<std::int64_t> random_args(std::mt19937_64& rng, std::uint32_t count,
                                      std::uint32_t mem_pages,
                                      std::uint32_t max_pages) {
  std::vector<std::int64_t> args(count);
  for (auto& a : args) {
    a = chance(rng, 0.5) ? interesting_address(rng, mem_pages, max_pages)
                         : static_cast<std::int64_t>(pick(rng, 8));
  }
  return args;
}

msb::ModuleImage generate_valid(std::mt19937_64& rng, const GenOptions& opts) {
  msb::ModuleImage image;
  image.max_pages = static_cast<std::uint32_t>(pick(rng, opts.max_pages + 1));
  image.mem_pages = static_cast<std::uint32_t>(pick(rng, image.max_pages + 1));

  std::vector<Sig> imports(pick(rng, opts.max_imports + 1));
  for (std::size_t i = 0; i < imports.size(); ++i) {
    imports[i] = {static_cast<std::uint32_t>(pick(rng, 4)),
                  static_cast<std::uint32_t>(pick(rng, 2))};
    image.imports.push_back("env.f" + std::to_string(i) + "/" +
                            std::to_string(imports[i].nargs) + ":" +
                            std::to_string(imports[i].nrets));
  }
  std::vector<Sig> funcs(1 + pick(rng, opts.max_functions));
  image.functions.resize(funcs.size());
  for (std::size_t f = 0; f < funcs.size(); ++f) {
    funcs[f] = {static_cast<std::uint32_t>(pick(rng, 3)),
                static_cast<std::uint32_t>(pick(rng, 2))};
    auto& body = image.functions[f];
    body.nargs = static_cast<std::uint8_t>(funcs[f].nargs);
    body.nrets = static_cast<std::uint8_t>(funcs[f].nrets);
    body.nlocals = static_cast<std::uint8_t>(1 + pick(rng, 3));
  }
  for (std::uint32_t f = 0; f < funcs.size(); ++f) {
    const auto length = static_cast<std::uint32_t>(
        opts.min_body + pick(rng, opts.max_body - opts.min_body + 1));
    BodyBuilder builder(rng, image, funcs, imports, f);
    image.functions[f].code = builder.build(length);
  }
  image.exports.push_back({"main", 0});
  for (std::uint32_t f = 1; f < funcs.size(); ++f) {
    if (chance(rng, 0.5)) image.exports.push_back({"f" + std::to_string(f), f});
  }
  return image;
}

void mutate(msb::ModuleImage& image, std::mt19937_64& rng) {
  auto& fn = image.functions[pick(rng, image.functions.size())];
  const auto n = static_cast<std::int64_t>(fn.code.size());
  auto& ins = fn.code[pick(rng, fn.code.size())];
  switch (pick(rng, 10)) {
    case 0:  // operand nudge: branch, call, import or local index may break
      ins.operand += chance(rng, 0.5) ? 1 : -1;
      break;
    case 1:
      ins.operand = static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(n + 2))) - 1;
      break;
    case 2:
      ins.op = static_cast<Opcode>(1 + pick(rng, 0x14));
      break;
    case 3:
      fn.code.erase(fn.code.begin() + static_cast<std::ptrdiff_t>(pick(rng, fn.code.size())));
      break;
    case 4:
      fn.code.insert(fn.code.begin() + static_cast<std::ptrdiff_t>(pick(rng, fn.code.size() + 1)),
                     Instr{static_cast<Opcode>(1 + pick(rng, 0x14)),
                           static_cast<std::int64_t>(pick(rng, 4))});
      break;
    case 5:
      fn.nrets = static_cast<std::uint8_t>(pick(rng, 3));
      break;
    case 6:
      if (chance(rng, 0.5)) {
        fn.nlocals = static_cast<std::uint8_t>(fn.nlocals > 0 ? fn.nlocals - 1 : 0);
      } else {
        fn.nargs = static_cast<std::uint8_t>(pick(rng, 4));
      }
      break;
    case 7:
      if (!image.imports.empty()) {
        auto& name = image.imports[pick(rng, image.imports.size())];
        static const char* kNames[] = {"env.g/9:1", "env.g/1:2", "envg/1:1",
                                       "env.g/1:0", "env.g/3:1", ".g/0:0"};
        name = kNames[pick(rng, 6)];
      } else {
        image.imports.push_back("env.h/0:1");
      }
      break;
    case 8:
      if (chance(rng, 0.5)) {
        image.mem_pages = image.max_pages + 1;
      } else {
        image.exports.push_back(image.exports.front());
      }
      break;
    default:
      fn.code.back() = Instr{Opcode::Const, 1};
      break;
  }
}

}  // namespace meshwa::testing
