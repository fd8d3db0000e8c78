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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct SampleDir {
  fs::path path;
  ~SampleDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const fs::path& samples() {
  static const SampleDir dir{[] {
    fs::path d = fs::temp_directory_path() /
                 ("meshwa_cli_" + std::to_string(::getpid()));
    const std::string cmd =
        std::string("\"") + MESHWA_SAMPLES_EXE + "\" \"" + d.string() + "\" >/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    return d;
  }()};
  return dir.path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with `args` (already shell-quoted where needed).
Result cli(const std::string& args, const std::string& env = "") {
  const fs::path out = samples() / "stdout.txt";
  const fs::path err = samples() / "stderr.txt";
  const std::string cmd = env + " \"" + std::string(MESHWA_CLI_EXE) + "\" " + args +
                          " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string sample(const char* file) { return "\"" + (samples() / file).string() + "\""; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("run prints the export result") {
  const Result r = cli("run " + sample("const42.json") + " --service echo --export main");
  CHECK(r.code == 0);
  CHECK(r.out == "42\n");
}

TEST_CASE("run rejects an untrusted toolchain with exit 1") {
  const Result r =
      cli("run " + sample("untrusted.json") + " --service echo --export main");
  CHECK(r.code == 1);
  CHECK(r.err.find("echo") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("run reports a trap with exit 2") {
  const Result r = cli("run " + sample("trap.json") + " --service faulty --export main");
  CHECK(r.code == 2);
  CHECK(r.err.find("OutOfBounds") != std::string::npos);
}

TEST_CASE("run on a missing manifest exits 3") {
  const Result r = cli("run " + sample("absent.json") + " --service a --export main");
  CHECK(r.code == 3);
}

TEST_CASE("bench writes a two-row report") {
  const fs::path csv = samples() / "r.csv";
  const Result r = cli("bench " + sample("const42.json") +
                       " --chain 4 --payload 64 --iters 300 --baseline --out \"" +
                       csv.string() + "\"");
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(csv));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] ==
        "config,topology,payload_bytes,iterations,p50_ns,p90_ns,p99_ns,"
        "throughput_rps,infra_tax");
  CHECK(rows[1].rfind("inproc,chain:4,64,300,", 0) == 0);
  CHECK(rows[2].rfind("process+sidecar,chain:4,64,300,", 0) == 0);
  CHECK(rows[1].substr(rows[1].size() - 7) == ",1.0000");
  CHECK(r.out.find("tax delta") != std::string::npos);
}

TEST_CASE("bench usage errors exit 1") {
  const std::string out = " --out \"" + (samples() / "u.csv").string() + "\"";
  CHECK(cli("bench " + sample("const42.json") + " --chain 4 --iters 0" + out).code == 1);
  CHECK(cli("bench " + sample("const42.json") + " --chain 0" + out).code == 1);
  CHECK(cli("bench " + sample("const42.json") + out).code == 1);
  CHECK(cli("bench " + sample("const42.json") + " --chain 2 --fanout 2" + out).code == 1);
  CHECK(cli("bench " + sample("const42.json") + " --chain 2").code != 0);
}

TEST_CASE("bench seed comes from MESHWA_BENCH_SEED") {
  const std::string out = " --out \"" + (samples() / "s.csv").string() + "\"";
  const Result a = cli("bench " + sample("const42.json") + " --chain 1 --iters 10" + out,
                       "MESHWA_BENCH_SEED=7");
  CHECK(a.code == 0);
  CHECK(a.out.find("seed=7") != std::string::npos);
  const Result bad = cli("bench " + sample("const42.json") + " --chain 1 --iters 10" + out,
                         "MESHWA_BENCH_SEED=x");
  CHECK(bad.code == 1);
}

TEST_CASE("inspect dumps runtime state") {
  const Result r = cli("inspect " + sample("const42.json"));
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["registry"]["services"].size() == 1);
  REQUIRE(doc["allocator"]["regions"].size() == 1);
  CHECK(doc["allocator"]["regions"][0]["owner"] == "echo");
  CHECK(doc["allocator"]["regions"][0]["length"] == 131072);

  const Result mesh = cli("inspect " + sample("mesh.json"));
  REQUIRE(mesh.code == 0);
  const auto m = nlohmann::json::parse(mesh.out);
  CHECK(m["registry"]["services"].size() == 4);
  CHECK(m["mesh"][0]["policy"] == "elide_after");
  CHECK(m["allocator"]["regions"].size() == 4);
}

TEST_CASE("inspect lists violations and exits 1") {
  const fs::path bad = samples() / "bad.json";
  std::ofstream(bad) << R"({"services":[{"name":"a","kind":"native","memory_bytes":65536,)"
                        R"("max_memory_bytes":65536,"toolchain":"t","imports":["x"]}],)"
                        R"("mesh":[{"caller":"a","callee":"q","policy":"passthrough"}],)"
                        R"("allowlist":["t"]})";
  const Result r = cli("inspect \"" + bad.string() + "\"");
  CHECK(r.code == 1);
  CHECK(r.err.find("DanglingImport") != std::string::npos);
  CHECK(r.err.find("DanglingMeshEndpoint") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("missing subcommand is a usage error") {
  CHECK(cli("").code != 0);
  CHECK(cli("frobnicate").code != 0);
}
