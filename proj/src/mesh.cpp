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

#include "meshwa/mesh.hpp"

#include <bit>
#include <cmath>

#include "meshwa/error.hpp"

namespace meshwa {

struct Mesh::Edge {
  MeshPolicy policy;
  FunctionTable* table = nullptr;
  std::shared_ptr<ServiceEntry> proxy;
  std::uint32_t on_call = 0;
  BindingMode proxy_binding = BindingMode::DirectCall;

  std::atomic<std::uint64_t> intercepted{0};
  std::atomic<std::uint64_t> direct{0};
  std::atomic<std::uint64_t> elided_at{0};  // 0 = not elided
  std::array<std::atomic<std::uint64_t>, kLatencyBuckets> histogram{};

  std::vector<std::unique_ptr<SlotTarget>> intercept_targets;
  std::vector<std::unique_ptr<SlotTarget>> direct_targets;

  void record_latency(std::uint64_t ns) {
    const std::size_t bucket =
        ns == 0 ? 0 : static_cast<std::size_t>(std::bit_width(ns) - 1);
    histogram[std::min(bucket, kLatencyBuckets - 1)].fetch_add(
        1, std::memory_order_relaxed);
  }

  bool maybe_elide() {
    if (policy.mode != MeshMode::ElideAfter) return false;
    if (intercepted.load() < policy.elide_after) return false;
    std::uint64_t expected = 0;
    if (!elided_at.compare_exchange_strong(expected, policy.elide_after)) {
      return false;
    }
    for (std::size_t i = 0; i < direct_targets.size(); ++i) {
      table->rewrite(i, direct_targets[i].get());
    }
    return true;
  }

  EdgeStats snapshot() const {
    EdgeStats s;
    s.calls_intercepted = intercepted.load();
    s.calls_direct = direct.load();
    s.calls_total = s.calls_intercepted + s.calls_direct;
    if (const auto at = elided_at.load(); at != 0) s.elided_at = at;
    for (std::size_t i = 0; i < kLatencyBuckets; ++i) {
      s.latency_log2[i] = histogram[i].load(std::memory_order_relaxed);
    }
    return s;
  }
};

namespace {

std::optional<Value> forward(const Mesh::Edge& edge, const CallEnv& env) {
  return edge.table->slot(env.slot_index).direct->dispatch(env);
}

// Direct path with telemetry; also the post-elision target.
class CountingTarget final : public SlotTarget {
 public:
  explicit CountingTarget(Mesh::Edge& edge) : edge_(edge) {}

  std::optional<Value> dispatch(const CallEnv& env) const override {
    edge_.direct.fetch_add(1, std::memory_order_relaxed);
    const std::uint64_t start = monotonic_ns();
    std::optional<Value> result = forward(edge_, env);
    edge_.record_latency(monotonic_ns() - start);
    return result;
  }
  std::string_view kind() const noexcept override { return "mesh-direct"; }

 private:
  Mesh::Edge& edge_;
};

class InterceptTarget final : public SlotTarget {
 public:
  explicit InterceptTarget(Mesh::Edge& edge) : edge_(edge) {}

  std::optional<Value> dispatch(const CallEnv& env) const override {
    if (!claim_interception()) {
      // Loaded before the slot was rewritten; the edge is already elided.
      edge_.direct.fetch_add(1, std::memory_order_relaxed);
      const std::uint64_t start = monotonic_ns();
      std::optional<Value> result = forward(edge_, env);
      edge_.record_latency(monotonic_ns() - start);
      return result;
    }
    const std::uint64_t start = monotonic_ns();
    const TableSlot& slot = env.table.slot(env.slot_index);
    const Interception info{env.caller, env.table.target(), slot.export_name};
    try {
      env.xcall.invoke(*edge_.proxy, edge_.on_call, edge_.proxy_binding,
                       env.caller, {}, env.payload, PayloadAccess::ReadOnly,
                       &info);
    } catch (const Error& e) {
      if (e.code() == Errc::CalleeTrapped) {
        throw Error(Errc::ProxyTrapped,
                    "proxy " + edge_.policy.proxy + " trapped on edge " +
                        edge_.policy.caller + " -> " + edge_.policy.callee,
                    e.trap());
      }
      throw;
    }
    std::optional<Value> result = forward(edge_, env);
    edge_.record_latency(monotonic_ns() - start);
    edge_.maybe_elide();
    return result;
  }
  std::string_view kind() const noexcept override { return "mesh-intercept"; }

 private:
  bool claim_interception() const {
    if (edge_.policy.mode != MeshMode::ElideAfter) {
      edge_.intercepted.fetch_add(1, std::memory_order_relaxed);
      return true;
    }
    std::uint64_t seen = edge_.intercepted.load();
    do {
      if (seen >= edge_.policy.elide_after) return false;
    } while (!edge_.intercepted.compare_exchange_weak(seen, seen + 1));
    return true;
  }

  Mesh::Edge& edge_;
};

}  // namespace

std::uint64_t EdgeStats::percentile_ns(double q) const {
  std::uint64_t total = 0;
  for (auto c : latency_log2) total += c;
  if (total == 0) return 0;
  const auto rank = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(q * static_cast<double>(total))));
  std::uint64_t seen = 0;
  for (std::size_t k = 0; k < kLatencyBuckets; ++k) {
    seen += latency_log2[k];
    if (seen >= rank) {
      return k + 1 >= 64 ? UINT64_MAX : (std::uint64_t{1} << (k + 1));
    }
  }
  return UINT64_MAX;
}

Mesh::Mesh(Registry& registry, Xcall& xcall)
    : registry_(registry), xcall_(xcall) {}

Mesh::~Mesh() = default;

void Mesh::install_policy(const MeshPolicy& policy) {
  auto caller = registry_.find(policy.caller);
  if (!caller) {
    throw Error(Errc::UnknownEndpoint,
                "mesh caller " + policy.caller + " is not registered");
  }
  if (!registry_.find(policy.callee)) {
    throw Error(Errc::UnknownEndpoint,
                "mesh callee " + policy.callee + " is not registered");
  }
  auto edge = std::make_shared<Edge>();
  edge->policy = policy;
  if (policy.mode != MeshMode::Passthrough) {
    edge->proxy = registry_.find(policy.proxy);
    if (!edge->proxy) {
      throw Error(Errc::UnknownEndpoint,
                  "mesh proxy " + policy.proxy + " is not registered");
    }
    const auto index = edge->proxy->export_index(kProxyExport);
    if (!index) {
      throw Error(Errc::ProxyMissingExport,
                  "mesh proxy " + policy.proxy + " does not export on_call");
    }
    edge->on_call = *index;
    edge->proxy_binding =
        negotiate(caller->cls, edge->proxy->cls, registry_.force_copy());
  }
  if (policy.mode == MeshMode::ElideAfter && policy.elide_after < 1) {
    throw Error(Errc::InvalidPolicy, "elide_after must be >= 1");
  }
  edge->table = &registry_.discover(policy.caller, policy.callee);
  for (std::size_t i = 0; i < edge->table->size(); ++i) {
    edge->direct_targets.push_back(std::make_unique<CountingTarget>(*edge));
    edge->intercept_targets.push_back(std::make_unique<InterceptTarget>(*edge));
  }

  std::lock_guard<std::mutex> lock(mu_);
  const auto& targets = policy.mode == MeshMode::Passthrough
                            ? edge->direct_targets
                            : edge->intercept_targets;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    edge->table->rewrite(i, targets[i].get());
  }
  auto& slot = edges_[{policy.caller, policy.callee}];
  if (slot) retired_.push_back(std::move(slot));
  slot = std::move(edge);
}

std::optional<Value> Mesh::dispatch(std::string_view caller,
                                    std::string_view callee, std::size_t slot,
                                    std::span<const Value> args,
                                    std::optional<ObjectHandle> payload) {
  return xcall_.call(caller, registry_.discover(caller, callee), slot, args,
                     payload);
}

bool Mesh::maybe_elide(std::string_view caller, std::string_view callee) {
  std::shared_ptr<Edge> edge;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = edges_.find({std::string(caller), std::string(callee)});
    if (it == edges_.end()) return false;
    edge = it->second;
  }
  return edge->maybe_elide();
}

EdgeStats Mesh::edge_stats(std::string_view caller,
                           std::string_view callee) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = edges_.find({std::string(caller), std::string(callee)});
  if (it == edges_.end()) {
    throw Error(Errc::UnknownEdge, "no mesh policy on edge " +
                                       std::string(caller) + " -> " +
                                       std::string(callee));
  }
  return it->second->snapshot();
}

std::vector<MeshPolicy> Mesh::policies() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<MeshPolicy> out;
  for (const auto& [key, edge] : edges_) out.push_back(edge->policy);
  return out;
}

std::string Mesh::stats_csv() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::string out(kEdgeStatsCsvHeader);
  out += '\n';
  for (const auto& [key, edge] : edges_) {
    const EdgeStats s = edge->snapshot();
    out += key.first + ',' + key.second + ',' + std::to_string(s.calls_total) +
           ',' + std::to_string(s.calls_intercepted) + ',' +
           std::to_string(s.calls_direct) + ',' +
           (s.elided_at ? std::to_string(*s.elided_at) : std::string()) + ',' +
           std::to_string(s.percentile_ns(0.50)) + ',' +
           std::to_string(s.percentile_ns(0.99)) + '\n';
  }
  return out;
}

}  // namespace meshwa
