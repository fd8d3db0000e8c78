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

#ifndef MESHWA_TESTS_SUPPORT_MODULE_GEN_HPP_
#define MESHWA_TESTS_SUPPORT_MODULE_GEN_HPP_

// Random MSB module generation for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include "meshwa/msb.hpp"

namespace meshwa::testing {

struct GenOptions {
  std::uint32_t max_functions = 3;
  std::uint32_t min_body = 4;
  std::uint32_t max_body = 48;
  std::uint32_t max_imports = 2;
  std::uint32_t max_pages = 3;  // upper bound for the module's max_pages
};

// A module that passes the verifier by construction: operand-stack depth
// is tracked while emitting, forward branches are patched to positions
// of matching depth, backward branches only go to such positions.
msb::ModuleImage generate_valid(std::mt19937_64& rng, const GenOptions& opts = {});

// Applies one structural or operand perturbation. The result may or may
// not verify.
void mutate(msb::ModuleImage& image, std::mt19937_64& rng);

// Arguments for a function, biased toward boundary-sized values.
std::vector<std::int64_t> random_args(std::mt19937_64& rng, std::uint32_t count,
                                      std::uint32_t mem_pages,
                                      std::uint32_t max_pages);

// Addresses near the edges of the accessible window and its growth steps.
std::int64_t interesting_address(std::mt19937_64& rng, std::uint32_t mem_pages,
                                 std::uint32_t max_pages);

}  // namespace meshwa::testing

#endif  // MESHWA_TESTS_SUPPORT_MODULE_GEN_HPP_
