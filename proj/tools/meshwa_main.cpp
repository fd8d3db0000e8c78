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

// meshwa: operator entry point.
//
//   meshwa run m.json --service echo --export main [--args 1 2]
//   meshwa bench m.json --chain 4 --payload 64 --iters 10000 --baseline --out r.csv
//   meshwa inspect m.json
//
// Exit codes: 0 ok, 1 validation or usage, 2 trap, 3 I/O, 4 other runtime
// failure.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meshwa/meshwa.h"

namespace {

int report_failure(meshwa_status status) {
  std::cerr << "meshwa: " << meshwa_status_name(status) << " error";
  if (const char* code = meshwa_last_error_code(); code != nullptr && *code) {
    std::cerr << " [" << code << "]";
  }
  if (const char* trap = meshwa_last_trap(); trap != nullptr) {
    std::cerr << " trap " << trap;
  }
  std::cerr << ": " << meshwa_last_error() << "\n";
  return static_cast<int>(status);
}

// Prints the violation list for an invalid manifest. Returns 0 when valid.
int check_manifest(const std::string& path) {
  char* report = nullptr;
  const meshwa_status status = meshwa_validate_manifest_file(path.c_str(), &report);
  if (status == MESHWA_OK) return 0;
  if (report != nullptr) {
    std::cerr << report;
    meshwa_string_free(report);
  }
  return report_failure(status);
}

class RuntimeHandle {
 public:
  RuntimeHandle() = default;
  ~RuntimeHandle() { meshwa_runtime_destroy(rt_); }
  RuntimeHandle(const RuntimeHandle&) = delete;
  RuntimeHandle& operator=(const RuntimeHandle&) = delete;
  meshwa_runtime** out() { return &rt_; }
  meshwa_runtime* get() const { return rt_; }

 private:
  meshwa_runtime* rt_ = nullptr;
};

int deploy(RuntimeHandle& rt, const std::string& manifest) {
  if (const int rc = check_manifest(manifest); rc != 0) return rc;
  if (meshwa_status s = meshwa_runtime_create(rt.out(), 0); s != MESHWA_OK) {
    return report_failure(s);
  }
  if (meshwa_status s = meshwa_deploy_file(rt.get(), manifest.c_str());
      s != MESHWA_OK) {
    return report_failure(s);
  }
  return 0;
}

int cmd_run(const std::string& manifest, const std::string& service,
            const std::string& export_name, const std::vector<std::int64_t>& args) {
  RuntimeHandle rt;
  if (const int rc = deploy(rt, manifest); rc != 0) return rc;
  std::int64_t result = 0;
  int has_result = 0;
  const meshwa_status s =
      meshwa_invoke(rt.get(), service.c_str(), export_name.c_str(), args.data(),
                    args.size(), &result, &has_result);
  if (s != MESHWA_OK) return report_failure(s);
  if (has_result) std::cout << result << "\n";
  return 0;
}

int cmd_inspect(const std::string& manifest) {
  RuntimeHandle rt;
  if (const int rc = deploy(rt, manifest); rc != 0) return rc;
  char* json = nullptr;
  if (meshwa_status s = meshwa_inspect(rt.get(), &json); s != MESHWA_OK) {
    return report_failure(s);
  }
  std::cout << json << "\n";
  meshwa_string_free(json);
  return 0;
}

struct BenchArgs {
  std::string manifest;
  std::uint32_t chain = 0;
  std::uint32_t fanout = 0;
  std::uint64_t payload = 64;
  std::uint64_t iters = 1000;
  std::uint64_t warmup = 0;
  std::uint64_t spin = 0;
  bool baseline = false;
  bool no_sidecar = false;
  std::string mesh = "none";
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  if (a.iters == 0) {
    std::cerr << "meshwa: usage error: --iters must be >= 1\n";
    return 1;
  }
  if ((a.chain == 0) == (a.fanout == 0)) {
    std::cerr << "meshwa: usage error: give exactly one of --chain N or "
                 "--fanout W, with N, W >= 1\n";
    return 1;
  }
  if (const int rc = check_manifest(a.manifest); rc != 0) return rc;
  meshwa_bench_options o{};
  o.manifest_path = a.manifest.c_str();
  o.topology = a.chain != 0 ? MESHWA_TOPOLOGY_CHAIN : MESHWA_TOPOLOGY_FANOUT;
  o.size = a.chain != 0 ? a.chain : a.fanout;
  o.payload_bytes = a.payload;
  o.iterations = a.iters;
  o.warmup_iterations = a.warmup;
  o.compute_spin_ns = a.spin;
  o.baseline = a.baseline ? 1 : 0;
  o.sidecar = a.no_sidecar ? 0 : 1;
  if (a.mesh == "intercept") o.mesh = MESHWA_MESH_INTERCEPT;
  if (a.mesh == "elide") o.mesh = MESHWA_MESH_ELIDE;
  if (a.mesh == "all") o.mesh = MESHWA_MESH_INTERCEPT | MESHWA_MESH_ELIDE;
  o.out_path = a.out.c_str();
  char* summary = nullptr;
  const meshwa_status s = meshwa_bench(&o, &summary);
  if (s != MESHWA_OK) return report_failure(s);
  std::cout << summary;
  meshwa_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshwa: single-address-space multi-service runtime"};
  app.require_subcommand(1);

  std::string manifest;
  std::string service;
  std::string export_name;
  std::vector<std::int64_t> args;
  auto* run = app.add_subcommand("run", "Deploy a manifest and invoke one export");
  run->add_option("manifest", manifest, "Manifest JSON file")->required();
  run->add_option("--service", service, "Service to invoke")->required();
  run->add_option("--export", export_name, "Export to invoke")->required();
  run->add_option("--args", args, "64-bit integer arguments");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run the in-process and baseline benchmarks");
  b->add_option("manifest", bench.manifest, "Manifest JSON file")->required();
  auto* chain = b->add_option("--chain", bench.chain, "Chain topology length");
  auto* fan = b->add_option("--fanout", bench.fanout, "Fan-out topology width");
  chain->excludes(fan);
  b->add_option("--payload", bench.payload, "Payload bytes per request");
  b->add_option("--iters", bench.iters, "Measured iterations");
  b->add_option("--warmup", bench.warmup, "Warmup iterations");
  b->add_option("--spin", bench.spin, "Busy compute per service per request (ns)");
  b->add_flag("--baseline", bench.baseline, "Also run the process-per-service baseline");
  b->add_flag("--no-sidecar", bench.no_sidecar, "Baseline without forwarder processes");
  b->add_option("--mesh", bench.mesh, "Extra in-process mesh rows")
      ->check(CLI::IsMember({"none", "intercept", "elide", "all"}));
  b->add_option("--out", bench.out, "CSV report path")->required();

  auto* inspect = app.add_subcommand("inspect", "Deploy a manifest and dump runtime state");
  inspect->add_option("manifest", manifest, "Manifest JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (run->parsed()) return cmd_run(manifest, service, export_name, args);
  if (b->parsed()) return cmd_bench(bench);
  return cmd_inspect(manifest);
}
