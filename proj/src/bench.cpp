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

#include "meshwa/bench.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>

#include "bench_env.hpp"
#include "meshwa/error.hpp"
#include "meshwa/runtime.hpp"

namespace meshwa::bench {
namespace {

std::string hop_name(std::uint32_t i) { return "bench.hop" + std::to_string(i); }
std::string sidecar_name(std::uint32_t i) {
  return "bench.sidecar" + std::to_string(i);
}

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

// Edges (caller, callee) of the topology over service indices; the
// client is index -1.
std::vector<std::pair<int, int>> edges_of(const Topology& topology) {
  std::vector<std::pair<int, int>> edges{{-1, 0}};
  if (const auto* chain = std::get_if<Chain>(&topology)) {
    for (std::uint32_t i = 1; i < chain->length; ++i) {
      edges.emplace_back(static_cast<int>(i) - 1, static_cast<int>(i));
    }
  } else {
    const auto& fan = std::get<FanOut>(topology);
    for (std::uint32_t i = 1; i <= fan.width; ++i) {
      edges.emplace_back(0, static_cast<int>(i));
    }
  }
  return edges;
}

std::string_view config_name(InprocMesh mesh) {
  switch (mesh) {
    case InprocMesh::None: return "inproc";
    case InprocMesh::Intercept: return "inproc+intercept";
    case InprocMesh::Elide: return "inproc+elide";
  }
  return "inproc";
}

}  // namespace

std::string topology_name(const Topology& topology) {
  if (const auto* chain = std::get_if<Chain>(&topology)) {
    return "chain:" + std::to_string(chain->length);
  }
  return "fanout:" + std::to_string(std::get<FanOut>(topology).width);
}

std::uint32_t service_count(const Topology& topology) {
  if (const auto* chain = std::get_if<Chain>(&topology)) return chain->length;
  return std::get<FanOut>(topology).width + 1;
}

void validate_workload(const WorkloadSpec& spec) {
  if (spec.iterations == 0) {
    throw Error(Errc::ZeroIterations, "iterations must be >= 1");
  }
  if (const auto* chain = std::get_if<Chain>(&spec.topology)) {
    if (chain->length == 0) {
      throw Error(Errc::InvalidWorkload, "chain length must be >= 1");
    }
  } else if (std::get<FanOut>(spec.topology).width == 0) {
    throw Error(Errc::InvalidWorkload, "fan-out width must be >= 1");
  }
}

std::uint64_t bench_seed() {
  const char* raw = std::getenv("MESHWA_BENCH_SEED");
  if (raw == nullptr || *raw == '\0') return kDefaultSeed;
  char* end = nullptr;
  errno = 0;
  const unsigned long long value = std::strtoull(raw, &end, 10);
  if (errno != 0 || *end != '\0' || *raw == '-') {
    throw Error(Errc::InvalidWorkload,
                std::string("MESHWA_BENCH_SEED is not an unsigned integer: ") +
                    raw);
  }
  return value;
}

std::vector<std::byte> make_payload(std::uint64_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  for (auto& b : bytes) b = static_cast<std::byte>(rng() & 0xFF);
  return bytes;
}

double compute_infra_tax(std::uint64_t compute_ns, std::uint64_t total_ns) {
  if (total_ns == 0) throw Error(Errc::ZeroTotalTime, "total time is zero");
  const double tax = 1.0 - static_cast<double>(compute_ns) /
                               static_cast<double>(total_ns);
  return std::clamp(tax, 0.0, 1.0);
}

std::uint64_t percentile(std::span<const std::uint64_t> sorted, double q) {
  if (sorted.empty()) return 0;
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

void summarize(BenchReport& report, std::vector<std::uint64_t> latencies,
               std::uint64_t compute_ns) {
  std::sort(latencies.begin(), latencies.end());
  std::uint64_t total = 0;
  for (auto l : latencies) total += l;
  // A closed loop never measures exactly zero; keep the ratio defined.
  total = std::max<std::uint64_t>(total, 1);
  report.p50_ns = percentile(latencies, 0.50);
  report.p90_ns = percentile(latencies, 0.90);
  report.p99_ns = percentile(latencies, 0.99);
  report.total_time_ns = total;
  report.compute_time_ns = std::min(compute_ns, total);
  report.throughput_rps = static_cast<double>(latencies.size()) /
                          (static_cast<double>(total) / 1e9);
  report.infra_tax = compute_infra_tax(report.compute_time_ns, total);
}

BenchReport run_inproc(const Manifest& manifest, const WorkloadSpec& spec,
                       InprocMesh mesh, const std::filesystem::path& base_dir) {
  validate_workload(spec);
  const std::uint64_t seed = bench_seed();

  Runtime runtime;
  runtime.deploy(manifest, base_dir);
  runtime.xcall().recorder().set_enabled(false);

  const std::uint32_t services = service_count(spec.topology);
  const auto edges = edges_of(spec.topology);
  std::vector<std::vector<std::uint32_t>> downstream(services);
  for (const auto& [from, to] : edges) {
    if (from >= 0) downstream[from].push_back(static_cast<std::uint32_t>(to));
  }

  bool measuring = false;
  std::uint64_t compute_ns = 0;
  std::vector<std::uint64_t> requests(services, 0);
  Registry& registry = runtime.registry();
  const std::size_t payload_size = static_cast<std::size_t>(spec.payload_bytes);
  // Downstream tables per hop, resolved once every hop is registered.
  std::vector<std::vector<FunctionTable*>> tables(services);

  for (std::uint32_t i = 0; i < services; ++i) {
    const std::string self = hop_name(i);
    auto scratch = std::make_shared<std::vector<std::byte>>(payload_size);
    NativeFunction handle = [&, self, scratch, i](
                                CallFrame& frame) -> std::optional<Value> {
      if (measuring) ++requests[i];
      Value sum = 0;
      if (frame.payload_view != nullptr) {
        frame.payload_view->read(0, *scratch);
        for (auto b : *scratch) sum += std::to_integer<Value>(b);
      }
      if (spec.compute_spin_ns != 0) {
        const std::uint64_t start = now_ns();
        std::uint64_t elapsed = 0;
        do {
          elapsed = now_ns() - start;
        } while (elapsed < spec.compute_spin_ns);
        if (measuring) compute_ns += elapsed;
      }
      for (FunctionTable* table : tables[i]) {
        frame.xcall->call(self, *table, 0, {}, frame.payload);
      }
      return sum;
    };
    runtime.add_native(self, {"handle"}, {std::move(handle)});
  }
  for (std::uint32_t i = 0; i < services; ++i) {
    for (auto d : downstream[i]) {
      tables[i].push_back(&registry.discover(hop_name(i), hop_name(d)));
    }
  }
  runtime.add_native("bench.client", {"main"},
                     {[](CallFrame&) -> std::optional<Value> { return 0; }},
                     std::max<std::uint64_t>(spec.payload_bytes, 1));

  if (mesh != InprocMesh::None) {
    for (std::uint32_t i = 0; i < services; ++i) {
      runtime.add_native(sidecar_name(i), {std::string(kProxyExport)},
                         {[scratch = std::vector<std::byte>(payload_size)](
                              CallFrame& frame) mutable -> std::optional<Value> {
                           Value sum = 0;
                           if (frame.payload_view != nullptr) {
                             frame.payload_view->read(0, scratch);
                             for (auto b : scratch) sum += std::to_integer<Value>(b);
                           }
                           return sum;
                         }});
    }
    for (const auto& [from, to] : edges) {
      MeshPolicy policy;
      policy.caller = from < 0 ? "bench.client" : hop_name(from);
      policy.callee = hop_name(to);
      policy.proxy = sidecar_name(to);
      policy.mode =
          mesh == InprocMesh::Intercept ? MeshMode::Intercept : MeshMode::ElideAfter;
      policy.elide_after = 1;
      runtime.mesh().install_policy(policy);
    }
  }

  std::optional<ObjectHandle> payload;
  if (spec.payload_bytes > 0) {
    payload = runtime.ledger().create_object("bench.client", spec.payload_bytes);
    runtime.ledger().write(*payload, "bench.client", 0,
                           make_payload(spec.payload_bytes, seed));
  }
  FunctionTable& entry = registry.discover("bench.client", hop_name(0));
  Xcall& xcall = runtime.xcall();

  // Elision needs one intercepted call per edge before measurement.
  const std::uint64_t warmup = mesh == InprocMesh::Elide
                                   ? std::max<std::uint64_t>(spec.warmup_iterations, 1)
                                   : spec.warmup_iterations;
  for (std::uint64_t i = 0; i < warmup; ++i) {
    xcall.call("bench.client", entry, 0, {}, payload);
  }

  std::vector<std::uint64_t> latencies;
  latencies.reserve(static_cast<std::size_t>(spec.iterations));
  measuring = true;
  for (std::uint64_t i = 0; i < spec.iterations; ++i) {
    const std::uint64_t start = now_ns();
    xcall.call("bench.client", entry, 0, {}, payload);
    latencies.push_back(now_ns() - start);
  }
  measuring = false;
  if (payload) runtime.ledger().owner_release(*payload, "bench.client");

  BenchReport report;
  report.config = std::string(config_name(mesh));
  report.topology = topology_name(spec.topology);
  report.payload_bytes = spec.payload_bytes;
  report.iterations = spec.iterations;
  report.warmup_iterations = warmup;
  report.compute_spin_ns = spec.compute_spin_ns;
  report.hop_requests = requests;
  report.seed = seed;
  report.host = host_name();
  report.timestamp = utc_timestamp();
  summarize(report, std::move(latencies), compute_ns);
  return report;
}

std::string report_csv(std::span<const BenchReport> reports) {
  std::string out(kReportCsvHeader);
  out += '\n';
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%llu,%llu,%llu,%llu,%.2f,%.4f\n",
                  r.config.c_str(), r.topology.c_str(),
                  static_cast<unsigned long long>(r.payload_bytes),
                  static_cast<unsigned long long>(r.iterations),
                  static_cast<unsigned long long>(r.p50_ns),
                  static_cast<unsigned long long>(r.p90_ns),
                  static_cast<unsigned long long>(r.p99_ns), r.throughput_rps,
                  r.infra_tax);
    out += buf;
  }
  return out;
}

std::string report_summary(std::span<const BenchReport> reports) {
  std::string out;
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf),
                  "%-18s %-10s payload=%lluB iters=%llu p50=%lluns p99=%lluns "
                  "throughput=%.0f/s compute=%lluns total=%lluns tax=%.4f\n",
                  r.config.c_str(), r.topology.c_str(),
                  static_cast<unsigned long long>(r.payload_bytes),
                  static_cast<unsigned long long>(r.iterations),
                  static_cast<unsigned long long>(r.p50_ns),
                  static_cast<unsigned long long>(r.p99_ns), r.throughput_rps,
                  static_cast<unsigned long long>(r.compute_time_ns),
                  static_cast<unsigned long long>(r.total_time_ns), r.infra_tax);
    out += buf;
  }
  if (reports.size() >= 2) {
    const BenchReport& a = reports.front();
    const BenchReport& b = reports.back();
    const double ratio = a.p50_ns == 0 ? 0.0
                                       : static_cast<double>(b.p50_ns) /
                                             static_cast<double>(a.p50_ns);
    std::snprintf(buf, sizeof(buf),
                  "%s vs %s: median latency ratio %.1fx, tax delta %+.4f\n",
                  b.config.c_str(), a.config.c_str(), ratio,
                  b.infra_tax - a.infra_tax);
    out += buf;
  }
  if (!reports.empty()) {
    std::snprintf(buf, sizeof(buf), "seed=%llu host=%s at %s\n",
                  static_cast<unsigned long long>(reports.front().seed),
                  reports.front().host.c_str(),
                  reports.front().timestamp.c_str());
    out += buf;
  }
  return out;
}

void emit_report(std::span<const BenchReport> reports,
                 const std::filesystem::path& path, std::ostream& summary) {
  if (reports.empty()) throw Error(Errc::EmptyReportSet, "no reports to emit");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << report_csv(reports);
  out.flush();
  if (!out) throw Error(Errc::Io, "error writing " + path.string());
  summary << report_summary(reports);
}

}  // namespace meshwa::bench
