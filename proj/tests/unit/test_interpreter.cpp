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
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "meshwa/error.hpp"
#include "meshwa/msb.hpp"
#include "meshwa/sasmem.hpp"
#include "module_gen.hpp"
#include "msb_asm.hpp"
#include "oracles.hpp"

using namespace meshwa;
using namespace meshwa::msb;
using meshwa::testing::func;
using meshwa::testing::single;

namespace {

class Loader {
 public:
  Loader() : arena_(std::uint64_t{64} << 20) {}

  ServiceInstance load(ModuleImage image, std::vector<HostFunction> bindings = {},
                       std::uint64_t region_bytes = 0) {
    auto vm = std::make_shared<const VerifiedModule>(verify_module(std::move(image)));
    if (region_bytes == 0) {
      region_bytes = std::max<std::uint64_t>(
          std::uint64_t{vm->image().max_pages} * kPageSize, 1);
    }
    const auto region = arena_.allocate("r" + std::to_string(next_++), region_bytes);
    return instantiate(vm, std::move(bindings), region, arena_.bytes(region));
  }

  sasmem::Arena& arena() { return arena_; }

 private:
  sasmem::Arena arena_;
  int next_ = 0;
};

Value run(ServiceInstance& inst, std::vector<Value> args = {},
          const InvokeOptions& opts = {}) {
  const InvokeResult r = inst.invoke("main", args, opts);
  REQUIRE_FALSE(r.trapped());
  REQUIRE(r.value.has_value());
  return *r.value;
}

TrapKind trap_of(ServiceInstance& inst, std::vector<Value> args = {},
                 const InvokeOptions& opts = {}) {
  const InvokeResult r = inst.invoke("main", args, opts);
  REQUIRE(r.trapped());
  return *r.trap;
}

}  // namespace

TEST_CASE("arithmetic and comparisons") {
  Loader l;
  auto inst = l.load(single(0, 1, 0, "const 6; const 7; mul; ret"));
  CHECK(run(inst) == 42);
  auto sub = l.load(single(2, 1, 0, "local.get 0; local.get 1; sub; ret"));
  CHECK(run(sub, {5, 9}) == -4);
  auto wrap = l.load(single(0, 1, 0, "const 0x7fffffffffffffff; const 1; add; ret"));
  CHECK(run(wrap) == std::numeric_limits<Value>::min());
  auto lt = l.load(single(2, 1, 0, "local.get 0; local.get 1; lt_s; ret"));
  CHECK(run(lt, {-1, 0}) == 1);
  CHECK(run(lt, {0, -1}) == 0);
  auto bits = l.load(single(0, 1, 0, "const 12; const 10; xor; const 3; or; const 7; and; ret"));
  CHECK(run(bits) == 7);
  auto eq = l.load(single(0, 1, 0, "const 3; const 3; eq; ret"));
  CHECK(run(eq) == 1);
}

TEST_CASE("fresh memory reads as zero") {
  Loader l;
  auto inst = l.load(single(0, 1, 0, "const 0; load.i64; ret"));
  CHECK(run(inst) == 0);
}

TEST_CASE("store bounds at the top of the window") {
  Loader l;
  const std::int64_t top = 2 * 65536;
  auto inst = l.load(single(1, 1, 0,
                            "local.get 0; const 99; store.i64; local.get 0; load.i64; ret",
                            2, 2));
  CHECK(run(inst, {top - 8}) == 99);
  CHECK(trap_of(inst, {top - 7}) == TrapKind::OutOfBounds);
  CHECK(trap_of(inst, {-1}) == TrapKind::OutOfBounds);
  CHECK(trap_of(inst, {std::numeric_limits<Value>::max()}) == TrapKind::OutOfBounds);
  CHECK(trap_of(inst, {std::numeric_limits<Value>::min()}) == TrapKind::OutOfBounds);
}

TEST_CASE("store takes the value from the top and the address below it") {
  Loader l;
  auto inst = l.load(single(0, 1, 0, "const 16; const 77; store.i64; const 16; load.i64; ret"));
  CHECK(run(inst) == 77);
  CHECK(inst.memory()[16] == std::byte{77});
}

TEST_CASE("memory growth") {
  Loader l;
  auto inst = l.load(single(1, 1, 0, "local.get 0; mem.grow; ret", 1, 2));
  CHECK(run(inst, {0}) == 1);
  CHECK(inst.cur_pages() == 1);
  CHECK(run(inst, {1}) == 1);
  CHECK(inst.cur_pages() == 2);
  CHECK(run(inst, {1}) == -1);
  CHECK(inst.cur_pages() == 2);
  CHECK(run(inst, {-1}) == -1);
  auto size = l.load(single(0, 1, 0, "mem.size; ret", 1, 3));
  CHECK(run(size) == 1);
}

TEST_CASE("grown pages are zeroed and become addressable") {
  Loader l;
  const char* text = R"(
    const 1
    mem.grow
    local.set 0
    const 65536
    load.i64
    ret)";
  auto inst = l.load(single(0, 1, 1, text, 1, 2));
  // dirty the second page through the host before growing into it
  std::memset(l.arena().bytes(inst.region()).data() + 65536, 0xFF, 64);
  CHECK(run(inst) == 0);
  CHECK(inst.cur_pages() == 2);
}

TEST_CASE("recursion without a base case hits the call-depth cap") {
  Loader l;
  ModuleImage image;
  image.functions.push_back(func(0, 0, 0, "call 0; ret"));
  image.exports.push_back({"main", 0});
  auto inst = l.load(image);
  const InvokeResult r = inst.invoke("main", {});
  REQUIRE(r.trapped());
  CHECK(*r.trap == TrapKind::CallDepthExceeded);
  CHECK(current_call_depth() == 0);
}

TEST_CASE("operand stack cap") {
  Loader l;
  ModuleImage image;
  // each frame keeps 8 values live, so the stack fills before 512 frames
  image.functions.push_back(
      func(0, 0, 1, "const 1; const 1; const 1; const 1; const 1; const 1; const 1; const 1; call 0; "
                    "local.set 0; local.set 0; local.set 0; local.set 0; "
                    "local.set 0; local.set 0; local.set 0; local.set 0; ret"));
  image.exports.push_back({"main", 0});
  auto inst = l.load(image);
  const InvokeResult r = inst.invoke("main", {});
  REQUIRE(r.trapped());
  CHECK(*r.trap == TrapKind::StackOverflow);
}

TEST_CASE("fuel bounds execution") {
  Loader l;
  auto spin = l.load(single(0, 0, 0, "top: br top"));
  InvokeOptions opts;
  opts.fuel = 1000;
  CHECK(trap_of(spin, {}, opts) == TrapKind::OutOfFuel);
  auto two = l.load(single(0, 1, 0, "const 1; ret"));
  opts.fuel = 2;
  CHECK(run(two, {}, opts) == 1);
  opts.fuel = 1;
  CHECK(trap_of(two, {}, opts) == TrapKind::OutOfFuel);
}

TEST_CASE("invoke argument and export checks") {
  Loader l;
  auto inst = l.load(single(1, 1, 0, "local.get 0; ret"));
  CHECK(run(inst, {5}) == 5);
  CHECK_THROWS_WITH_AS(inst.invoke("nope", {}), doctest::Contains("nope"), Error);
  try {
    inst.invoke("main", {});
    FAIL("expected ArityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ArityMismatch);
  }
}

TEST_CASE("instantiation checks") {
  Loader l;
  ModuleImage two_imports = single(0, 0, 0, "ret");
  two_imports.imports = {"a.x/0:0", "a.y/0:0"};
  HostFunction noop = [](ServiceInstance&, std::span<const Value>) {
    return std::optional<Value>();
  };
  try {
    l.load(two_imports, {noop});
    FAIL("expected BindingArity");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BindingArity);
  }
  try {
    l.load(single(0, 0, 0, "ret", 1, 2), {}, 65536);
    FAIL("expected RegionTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RegionTooSmall);
  }

  auto vm = std::make_shared<const VerifiedModule>(verify_module(single(0, 0, 0, "ret")));
  const auto region = l.arena().allocate("shared", 65536);
  auto first = instantiate(vm, {}, region, l.arena().bytes(region));
  try {
    instantiate(vm, {}, region, l.arena().bytes(region));
    FAIL("expected RegionInUse");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RegionInUse);
  }
}

TEST_CASE("host imports receive arguments in order and may trap") {
  Loader l;
  ModuleImage image = single(0, 1, 0, "const 10; const 3; call_import 0; ret");
  image.imports = {"env.sub/2:1"};
  auto inst = l.load(image, {[](ServiceInstance&, std::span<const Value> a) {
                       return std::optional<Value>(a[0] - a[1]);
                     }});
  CHECK(run(inst) == 7);

  auto trapping = l.load(image, {[](ServiceInstance&, std::span<const Value>) -> std::optional<Value> {
                           throw HostTrap{TrapKind::UnreachableImport};
                         }});
  CHECK(trap_of(trapping) == TrapKind::UnreachableImport);

  auto failing = l.load(image, {[](ServiceInstance&, std::span<const Value>) -> std::optional<Value> {
                          throw Error(Errc::ServiceGone, "gone");
                        }});
  CHECK_THROWS_AS(failing.invoke("main", {}), Error);
  CHECK(current_call_depth() == 0);
  // the instance stays usable after the error
  CHECK(trap_of(trapping) == TrapKind::UnreachableImport);
}

TEST_CASE("a trap leaves earlier stores in place and the instance usable") {
  Loader l;
  auto inst = l.load(single(1, 1, 0, "const 8; const 5; store.i64; local.get 0; load.i64; ret"));
  CHECK(trap_of(inst, {65536}) == TrapKind::OutOfBounds);
  CHECK(inst.memory()[8] == std::byte{5});
  CHECK(run(inst, {8}) == 5);
}

TEST_CASE("execution is deterministic across fresh instances") {
  std::mt19937_64 rng(21);
  Loader l;
  for (int i = 0; i < 200; ++i) {
    const ModuleImage image = meshwa::testing::generate_valid(rng);
    const auto args = meshwa::testing::random_args(rng, image.functions[0].nargs,
                                                   image.mem_pages, image.max_pages);
    std::vector<HostFunction> hosts;
    for (const auto& name : image.imports) {
      const auto nrets = parse_import_name(name).nrets;
      hosts.push_back([nrets](ServiceInstance&, std::span<const Value> a) {
        return meshwa::testing::ContainmentHarness::host_sum(a, nrets);
      });
    }
    InvokeResult results[2];
    std::set<std::ptrdiff_t> touched[2];
    for (int k = 0; k < 2; ++k) {
      auto inst = l.load(image, hosts);
      struct Recorder : AccessObserver {
        const std::byte* base;
        std::set<std::ptrdiff_t>* out;
        void on_access(const std::byte* a, std::size_t, bool) override {
          out->insert(a - base);
        }
      } rec;
      rec.base = inst.memory().data();
      rec.out = &touched[k];
      InvokeOptions opts;
      opts.fuel = 20000;
      opts.observer = &rec;
      results[k] = inst.invoke("main", args, opts);
    }
    CHECK(results[0].value == results[1].value);
    CHECK(results[0].trap == results[1].trap);
    CHECK(touched[0] == touched[1]);
  }
}
