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

#ifndef MESHWA_BENCH_HPP_
#define MESHWA_BENCH_HPP_

// Benchmark harness: the same service graph run in process under the
// runtime and as one OS process per service talking over local sockets,
// optionally with a forwarder process in front of every service.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meshwa/manifest.hpp"

namespace meshwa::bench {

struct Chain {
  std::uint32_t length = 1;
};
struct FanOut {
  std::uint32_t width = 1;
};
using Topology = std::variant<Chain, FanOut>;

// "chain:4" / "fanout:3"
std::string topology_name(const Topology& topology);
// Services taking part in one request (hops for a chain, root + leaves
// for a fan-out).
std::uint32_t service_count(const Topology& topology);

struct WorkloadSpec {
  Topology topology = Chain{1};
  std::uint64_t payload_bytes = 64;
  std::uint64_t iterations = 1000;
  std::uint64_t warmup_iterations = 0;
  std::uint64_t compute_spin_ns = 0;  // busy work per service per request
};

// Throws ZeroIterations or InvalidWorkload.
void validate_workload(const WorkloadSpec& spec);

enum class InprocMesh : std::uint8_t {
  None,       // "inproc"
  Intercept,  // "inproc+intercept": a sidecar proxy on every edge
  Elide,      // "inproc+elide": sidecars that elide after the first call
};

struct BaselineConfig {
  bool sidecar = true;
  int timeout_ms = 10000;  // per response
  // Fault injection: SIGKILL process `kill_process` (index into the
  // report's process list) once `kill_after` requests have completed.
  std::optional<std::size_t> kill_process;
  std::uint64_t kill_after = 0;
};

struct BenchReport {
  std::string config;
  std::string topology;
  std::uint64_t payload_bytes = 0;
  std::uint64_t iterations = 0;
  std::uint64_t warmup_iterations = 0;
  std::uint64_t compute_spin_ns = 0;
  std::uint64_t p50_ns = 0;
  std::uint64_t p90_ns = 0;
  std::uint64_t p99_ns = 0;
  double throughput_rps = 0;
  std::uint64_t total_time_ns = 0;
  std::uint64_t compute_time_ns = 0;
  double infra_tax = 0;
  // Measured requests handled by each service, in topology order.
  std::vector<std::uint64_t> hop_requests;
  std::vector<std::string> processes;  // baseline only
  std::uint64_t seed = 0;
  std::string host;
  std::string timestamp;  // UTC, ISO 8601
};

inline constexpr std::string_view kReportCsvHeader =
    "config,topology,payload_bytes,iterations,p50_ns,p90_ns,p99_ns,"
    "throughput_rps,infra_tax";

inline constexpr std::uint64_t kDefaultSeed = 42;

// MESHWA_BENCH_SEED, or kDefaultSeed when unset. Throws InvalidWorkload
// when set to something other than an unsigned integer.
std::uint64_t bench_seed();

// Payload contents for a run; identical for both harnesses given a seed.
std::vector<std::byte> make_payload(std::uint64_t size, std::uint64_t seed);

// 1 - compute/total clamped to [0, 1]. Throws ZeroTotalTime.
double compute_infra_tax(std::uint64_t compute_ns, std::uint64_t total_ns);

// Nearest-rank percentile of an ascending sample. Empty -> 0.
std::uint64_t percentile(std::span<const std::uint64_t> sorted, double q);

// Fills percentiles, totals, throughput and tax from per-request
// latencies.
void summarize(BenchReport& report, std::vector<std::uint64_t> latencies,
               std::uint64_t compute_ns);

// The manifest is deployed first (its images resolve against base_dir);
// the harness then adds its own services named "bench.*".
BenchReport run_inproc(const Manifest& manifest, const WorkloadSpec& spec,
                       InprocMesh mesh = InprocMesh::None,
                       const std::filesystem::path& base_dir = ".");

// Throws SpawnFailure, SocketError or ChildCrashedError; no partial
// report is returned on failure.
BenchReport run_process_baseline(const Manifest& manifest,
                                 const WorkloadSpec& spec,
                                 const BaselineConfig& config = {});

std::string report_csv(std::span<const BenchReport> reports);
std::string report_summary(std::span<const BenchReport> reports);

// Writes the CSV to path and the summary to `summary`. Throws
// EmptyReportSet or Io.
void emit_report(std::span<const BenchReport> reports,
                 const std::filesystem::path& path, std::ostream& summary);

}  // namespace meshwa::bench

#endif  // MESHWA_BENCH_HPP_
