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

#ifndef MESHWA_MESH_HPP_
#define MESHWA_MESH_HPP_

// In-address-space service mesh. A policy on a (caller, callee) edge
// rewrites the caller's table slots so calls run through a proxy
// service's `on_call` export first; ElideAfter{n} rewrites them back to
// the callee after the n-th intercepted call.

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshwa/manifest.hpp"
#include "meshwa/registry.hpp"
#include "meshwa/xcall.hpp"

namespace meshwa {

inline constexpr std::string_view kProxyExport = "on_call";
inline constexpr std::size_t kLatencyBuckets = 64;

struct EdgeStats {
  std::uint64_t calls_total = 0;
  std::uint64_t calls_intercepted = 0;
  std::uint64_t calls_direct = 0;
  std::optional<std::uint64_t> elided_at;
  // Bucket k counts calls with latency in [2^k, 2^(k+1)) ns; bucket 0
  // also holds sub-nanosecond samples.
  std::array<std::uint64_t, kLatencyBuckets> latency_log2{};

  // Upper bound of the bucket holding quantile q, or 0 with no samples.
  std::uint64_t percentile_ns(double q) const;
};

inline constexpr std::string_view kEdgeStatsCsvHeader =
    "caller,callee,total,intercepted,direct,elided_at,p50_ns,p99_ns";

class Mesh {
 public:
  Mesh(Registry& registry, Xcall& xcall);
  ~Mesh();
  Mesh(const Mesh&) = delete;
  Mesh& operator=(const Mesh&) = delete;

  // Replaces any earlier policy for the edge; statistics restart.
  void install_policy(const MeshPolicy& policy);

  // xcall::call through the caller's table to callee.
  std::optional<Value> dispatch(std::string_view caller,
                                std::string_view callee, std::size_t slot,
                                std::span<const Value> args,
                                std::optional<ObjectHandle> payload = {});

  // Elides the edge if it is ElideAfter{n} and n calls were intercepted.
  bool maybe_elide(std::string_view caller, std::string_view callee);

  EdgeStats edge_stats(std::string_view caller, std::string_view callee) const;
  std::vector<MeshPolicy> policies() const;
  std::string stats_csv() const;

  struct Edge;

 private:
  Registry& registry_;
  Xcall& xcall_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<Edge>> edges_;
  // Replaced edges stay alive: a concurrent dispatch may still hold one.
  std::vector<std::shared_ptr<Edge>> retired_;
};

}  // namespace meshwa

#endif  // MESHWA_MESH_HPP_
