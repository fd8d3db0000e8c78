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

// Writes a few sample modules and manifests for trying the CLI:
//
//   msb_samples <dir>
//   meshwa run <dir>/const42.json --service echo --export main    -> 42
//   meshwa run <dir>/trap.json --service faulty --export main     -> exit 2
//   meshwa bench <dir>/mesh.json --chain 4 --payload 64 --iters 10000
//       --baseline --out r.csv

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "meshwa/msb.hpp"

namespace {

using meshwa::msb::FunctionBody;
using meshwa::msb::Instr;
using meshwa::msb::ModuleImage;
using Op = meshwa::msb::Opcode;

ModuleImage const42() {
  ModuleImage m;
  m.mem_pages = 1;
  m.max_pages = 1;
  m.functions.push_back(FunctionBody{0, 1, 0, {{Op::Const, 42}, {Op::Ret, 0}}});
  m.exports.push_back({"main", 0});
  return m;
}

// Stores one byte past the last valid 8-byte slot.
ModuleImage out_of_bounds() {
  ModuleImage m;
  m.mem_pages = 1;
  m.max_pages = 1;
  m.functions.push_back(FunctionBody{
      0, 1, 0,
      {{Op::Const, 65536 - 7}, {Op::Const, 1}, {Op::Store, 0}, {Op::Const, 0},
       {Op::Ret, 0}}});
  m.exports.push_back({"main", 0});
  return m;
}

// echo(ref, len): round-trips the payload through the proxy functions when
// it arrives by proxy; a copied payload already sits at offset 0.
ModuleImage proxy_echo() {
  ModuleImage m;
  m.mem_pages = 1;
  m.max_pages = 2;
  m.imports = {"proxy.read/4:1", "proxy.write/4:1"};
  m.functions.push_back(FunctionBody{
      2, 1, 1,
      {{Op::LocalGet, 0}, {Op::Const, 0}, {Op::LtS, 0}, {Op::BrIf, 6},
       {Op::LocalGet, 1}, {Op::Ret, 0},
       {Op::LocalGet, 0}, {Op::Const, 0}, {Op::Const, 0}, {Op::LocalGet, 1},
       {Op::CallImport, 0}, {Op::LocalSet, 2},
       {Op::LocalGet, 0}, {Op::Const, 0}, {Op::Const, 0}, {Op::LocalGet, 1},
       {Op::CallImport, 1}, {Op::LocalSet, 2},
       {Op::LocalGet, 1}, {Op::Ret, 0}}});
  m.exports.push_back({"echo", 0});
  return m;
}

void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string sandboxed(const std::string& name, const std::string& image,
                      const std::string& toolchain = "msbc-1.0") {
  return R"({"name":")" + name + R"(","kind":"sandboxed","image":")" + image +
         R"(","memory_bytes":65536,"max_memory_bytes":131072,"toolchain":")" +
         toolchain + R"(","imports":[]})";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: msb_samples <output-dir>\n";
    return 1;
  }
  try {
    const std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);
    for (const auto& [file, image] :
         {std::pair{"const42.msb", const42()}, std::pair{"oob.msb", out_of_bounds()},
          std::pair{"proxy_echo.msb", proxy_echo()}}) {
      meshwa::msb::verify_module(image);
      write_bytes(dir / file, meshwa::msb::encode_module(image));
    }
    write_text(dir / "const42.json",
               R"({"services":[)" + sandboxed("echo", "const42.msb") +
                   R"(],"mesh":[],"allowlist":["msbc-1.0"]})" + "\n");
    write_text(dir / "trap.json",
               R"({"services":[)" + sandboxed("faulty", "oob.msb") +
                   R"(],"mesh":[],"allowlist":["msbc-1.0"]})" + "\n");
    write_text(dir / "untrusted.json",
               R"({"services":[)" + sandboxed("echo", "const42.msb", "gcc-evil") +
                   R"(],"mesh":[],"allowlist":["msbc-1.0"]})" + "\n");
    write_text(
        dir / "mesh.json",
        R"({"services":[)" + sandboxed("sbx", "proxy_echo.msb") +
            R"(,{"name":"echo","kind":"native","memory_bytes":65536,)"
            R"("max_memory_bytes":65536,"toolchain":"native-1","imports":[]},)"
            R"({"name":"front","kind":"native","image":"relay","memory_bytes":65536,)"
            R"("max_memory_bytes":65536,"toolchain":"native-1","imports":["echo"]},)"
            R"({"name":"tap","kind":"native","memory_bytes":65536,)"
            R"("max_memory_bytes":65536,"toolchain":"native-1","imports":[]}],)"
            R"("mesh":[{"caller":"front","callee":"echo","policy":"elide_after",)"
            R"("proxy":"tap","elide_after":3}],)"
            R"("allowlist":["msbc-1.0","native-1"]})" "\n");
    std::cout << "wrote samples to " << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "msb_samples: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
