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

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "meshwa/meshwa.h"

namespace fs = std::filesystem;

namespace {

struct SampleDir {
  fs::path path;
  ~SampleDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// Sample manifests and modules written once by the msb_samples tool.
const fs::path& samples() {
  static const SampleDir dir{[] {
    fs::path d = fs::temp_directory_path() /
                 ("meshwa_capi_" + std::to_string(::getpid()));
    const std::string cmd =
        std::string("\"") + MESHWA_SAMPLES_EXE + "\" \"" + d.string() + "\" >/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    return d;
  }()};
  return dir.path;
}

struct Runtime {
  meshwa_runtime* rt = nullptr;
  explicit Runtime(int force_copy = 0) {
    REQUIRE(meshwa_runtime_create(&rt, force_copy) == MESHWA_OK);
  }
  ~Runtime() { meshwa_runtime_destroy(rt); }
  meshwa_status deploy(const char* file) {
    return meshwa_deploy_file(rt, (samples() / file).c_str());
  }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  meshwa_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("deploy and invoke through the C API") {
  Runtime r;
  REQUIRE(r.deploy("const42.json") == MESHWA_OK);
  int64_t result = 0;
  int has = 0;
  CHECK(meshwa_invoke(r.rt, "echo", "main", nullptr, 0, &result, &has) == MESHWA_OK);
  CHECK(has == 1);
  CHECK(result == 42);
  CHECK(std::string(meshwa_last_error_code()).empty());
  CHECK(meshwa_last_trap() == nullptr);

  CHECK(meshwa_invoke(r.rt, "echo", "nope", nullptr, 0, &result, &has) ==
        MESHWA_ERR_VALIDATION);
  CHECK(std::string(meshwa_last_error_code()) == "ExportNotFound");
  const int64_t extra[] = {1};
  CHECK(meshwa_invoke(r.rt, "echo", "main", extra, 1, &result, &has) ==
        MESHWA_ERR_VALIDATION);
  CHECK(std::string(meshwa_last_error_code()) == "ArityMismatch");
}

TEST_CASE("traps surface with their kind") {
  Runtime r;
  REQUIRE(r.deploy("trap.json") == MESHWA_OK);
  int64_t result = 0;
  int has = 0;
  CHECK(meshwa_invoke(r.rt, "faulty", "main", nullptr, 0, &result, &has) ==
        MESHWA_ERR_TRAP);
  CHECK(std::string(meshwa_last_error_code()) == "CalleeTrapped");
  REQUIRE(meshwa_last_trap() != nullptr);
  CHECK(std::string(meshwa_last_trap()) == "OutOfBounds");
  CHECK(std::string(meshwa_status_name(MESHWA_ERR_TRAP)) == "trap");
}

TEST_CASE("provenance and validation failures") {
  Runtime r;
  CHECK(r.deploy("untrusted.json") == MESHWA_ERR_VALIDATION);
  CHECK(std::string(meshwa_last_error_code()) == "Provenance");
  CHECK(std::string(meshwa_last_error()).find("echo") != std::string::npos);
  CHECK(r.deploy("missing.json") == MESHWA_ERR_IO);

  const fs::path bad = samples() / "dangling.json";
  std::ofstream(bad) << R"({"services":[{"name":"a","kind":"native","memory_bytes":65536,)"
                        R"("max_memory_bytes":65536,"toolchain":"t","imports":["x","y"]}],)"
                        R"("mesh":[],"allowlist":["t"]})";
  char* report = nullptr;
  CHECK(meshwa_validate_manifest_file(bad.c_str(), &report) == MESHWA_ERR_VALIDATION);
  const std::string text = take(report);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find("DanglingImport") != std::string::npos);
  report = nullptr;
  CHECK(meshwa_validate_manifest_file((samples() / "const42.json").c_str(), &report) ==
        MESHWA_OK);
  take(report);
}

TEST_CASE("payload calls and mesh elision through the C API") {
  for (int force_copy : {0, 1}) {
    CAPTURE(force_copy);
    Runtime r(force_copy);
    REQUIRE(r.deploy("mesh.json") == MESHWA_OK);
    uint64_t h = 0;
    REQUIRE(meshwa_object_create(r.rt, "front", 16, &h) == MESHWA_OK);
    const char data[16] = "meshwa-payload!";
    REQUIRE(meshwa_object_write(r.rt, h, "front", 0, data, 16) == MESHWA_OK);
    int64_t result = 0;
    int has = 0;
    CHECK(meshwa_call(r.rt, "front", "sbx", "echo", nullptr, 0, h, &result, &has) ==
          MESHWA_OK);
    CHECK(result == 16);
    for (int i = 0; i < 5; ++i) {
      CHECK(meshwa_call(r.rt, "front", "echo", "echo", nullptr, 0, h, &result,
                        &has) == MESHWA_OK);
      CHECK(result == 16);
    }
    char back[16] = {};
    CHECK(meshwa_object_read(r.rt, h, "front", 0, back, 16) == MESHWA_OK);
    CHECK(std::string(back, 16) == std::string(data, 16));
    CHECK(meshwa_object_read(r.rt, h, "echo", 0, back, 16) == MESHWA_ERR_RUNTIME);
    CHECK(std::string(meshwa_last_error_code()) == "NotAuthorized");

    char* json = nullptr;
    REQUIRE(meshwa_inspect(r.rt, &json) == MESHWA_OK);
    const auto doc = nlohmann::json::parse(take(json));
    REQUIRE(doc["mesh"].size() == 1);
    CHECK(doc["mesh"][0]["stats"]["elided_at"] == 3);
    CHECK(doc["mesh"][0]["stats"]["total"] == 5);
    CHECK(doc["registry"]["services"].size() == 4);

    CHECK(meshwa_object_release(r.rt, h, "front") == MESHWA_OK);
    CHECK(meshwa_object_release(r.rt, h, "front") == MESHWA_ERR_RUNTIME);
  }
}

TEST_CASE("bench through the C API writes the CSV") {
  const fs::path out = samples() / "capi_bench.csv";
  meshwa_bench_options o{};
  const std::string manifest = (samples() / "const42.json").string();
  const std::string out_path = out.string();
  o.manifest_path = manifest.c_str();
  o.topology = MESHWA_TOPOLOGY_CHAIN;
  o.size = 2;
  o.payload_bytes = 64;
  o.iterations = 50;
  o.mesh = MESHWA_MESH_INTERCEPT | MESHWA_MESH_ELIDE;
  o.out_path = out_path.c_str();
  char* summary = nullptr;
  REQUIRE(meshwa_bench(&o, &summary) == MESHWA_OK);
  CHECK(take(summary).find("inproc") != std::string::npos);
  std::ifstream in(out);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[1].rfind("inproc,", 0) == 0);
  CHECK(lines[2].rfind("inproc+intercept,", 0) == 0);
  CHECK(lines[3].rfind("inproc+elide,", 0) == 0);

  o.iterations = 0;
  CHECK(meshwa_bench(&o, &summary) == MESHWA_ERR_VALIDATION);
  CHECK(std::string(meshwa_last_error_code()) == "ZeroIterations");
}

TEST_CASE("null arguments are rejected") {
  CHECK(meshwa_runtime_create(nullptr, 0) != MESHWA_OK);
  CHECK(meshwa_deploy_file(nullptr, "x") != MESHWA_OK);
  meshwa_string_free(nullptr);
  meshwa_runtime_destroy(nullptr);
}
