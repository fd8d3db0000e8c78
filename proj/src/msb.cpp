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

#include <charconv>
#include <cstring>

#include "meshwa/msb.hpp"

namespace meshwa::msb {
namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x53, 0x42, 0x31};  // "MSB1"

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw Error(Errc::Truncated, std::string("truncated ") + what +
                                       " at offset " + std::to_string(pos_));
    }
    T value{};
    // Little-endian host assumed; the format is little-endian.
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string read_name(const char* what) {
    const auto len = read<std::uint16_t>(what);
    if (bytes_.size() - pos_ < len) {
      throw Error(Errc::Truncated, std::string("truncated ") + what +
                                       " at offset " + std::to_string(pos_));
    }
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return out;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_count(std::uint32_t count, std::uint32_t cap, const char* what) {
  if (count > cap) {
    throw Error(Errc::LimitExceeded, std::string(what) + " count " +
                                         std::to_string(count) +
                                         " exceeds cap " + std::to_string(cap));
  }
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

void put_name(std::vector<std::uint8_t>& out, const std::string& name) {
  if (name.size() > UINT16_MAX) {
    throw Error(Errc::LimitExceeded, "name longer than 65535 bytes");
  }
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
}

}  // namespace

std::string_view opcode_name(Opcode op) noexcept {
  switch (op) {
    case Opcode::Const: return "const";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::And: return "and";
    case Opcode::Or: return "or";
    case Opcode::Xor: return "xor";
    case Opcode::Eq: return "eq";
    case Opcode::LtS: return "lt_s";
    case Opcode::Load: return "load.i64";
    case Opcode::Store: return "store.i64";
    case Opcode::LocalGet: return "local.get";
    case Opcode::LocalSet: return "local.set";
    case Opcode::Br: return "br";
    case Opcode::BrIf: return "br_if";
    case Opcode::Call: return "call";
    case Opcode::CallImport: return "call_import";
    case Opcode::Ret: return "ret";
    case Opcode::MemSize: return "mem.size";
    case Opcode::MemGrow: return "mem.grow";
  }
  return "?";
}

ImportSignature parse_import_name(std::string_view name) {
  auto bad = [&name](const char* why) {
    return Error(Errc::BadImport,
                 "import \"" + std::string(name) + "\": " + why);
  };
  const auto slash = name.rfind('/');
  if (slash == std::string_view::npos) throw bad("missing /<nargs>:<nrets>");
  const std::string_view qualified = name.substr(0, slash);
  const std::string_view sig = name.substr(slash + 1);
  const auto dot = qualified.rfind('.');
  if (dot == std::string_view::npos || dot == 0 ||
      dot + 1 == qualified.size()) {
    throw bad("expected <service>.<export>");
  }
  const auto colon = sig.find(':');
  if (colon == std::string_view::npos) throw bad("expected <nargs>:<nrets>");
  unsigned nargs = 0;
  unsigned nrets = 0;
  const auto a = sig.substr(0, colon);
  const auto r = sig.substr(colon + 1);
  if (std::from_chars(a.data(), a.data() + a.size(), nargs).ptr !=
          a.data() + a.size() ||
      a.empty() ||
      std::from_chars(r.data(), r.data() + r.size(), nrets).ptr !=
          r.data() + r.size() ||
      r.empty()) {
    throw bad("malformed signature");
  }
  if (nargs > kMaxImportArgs) throw bad("more than 8 arguments");
  if (nrets > 1) throw bad("more than 1 result");
  return ImportSignature{std::string(qualified.substr(0, dot)),
                         std::string(qualified.substr(dot + 1)),
                         static_cast<std::uint8_t>(nargs),
                         static_cast<std::uint8_t>(nrets)};
}

const Export* ModuleImage::find_export(std::string_view name) const noexcept {
  for (const auto& e : exports) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

ModuleImage decode_module(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::BadMagic, "not an MSB1 module");
  }
  Reader in(bytes.subspan(4));
  ModuleImage m;
  m.version = in.read<std::uint32_t>("version");
  if (m.version != 1) {
    throw Error(Errc::BadVersion,
                "unsupported version " + std::to_string(m.version));
  }
  m.mem_pages = in.read<std::uint32_t>("mem_pages");
  m.max_pages = in.read<std::uint32_t>("max_pages");
  if (m.max_pages > kMaxPages) {
    throw Error(Errc::LimitExceeded, "max_pages " + std::to_string(m.max_pages) +
                                         " exceeds 4 GiB (65536 pages)");
  }
  if (m.mem_pages > kMaxPages) {
    throw Error(Errc::LimitExceeded, "mem_pages " + std::to_string(m.mem_pages) +
                                         " exceeds 4 GiB (65536 pages)");
  }

  const auto import_count = in.read<std::uint32_t>("import count");
  check_count(import_count, kMaxImports, "import");
  m.imports.reserve(import_count);
  for (std::uint32_t i = 0; i < import_count; ++i) {
    std::string name = in.read_name("import name");
    parse_import_name(name);
    m.imports.push_back(std::move(name));
  }

  const auto func_count = in.read<std::uint32_t>("function count");
  check_count(func_count, kMaxFunctions, "function");
  // Each function header is at least 7 bytes.
  if (func_count > in.remaining() / 7) {
    throw Error(Errc::Truncated, "function table larger than input");
  }
  m.functions.reserve(func_count);
  for (std::uint32_t f = 0; f < func_count; ++f) {
    FunctionBody body;
    body.nargs = in.read<std::uint8_t>("nargs");
    body.nrets = in.read<std::uint8_t>("nrets");
    body.nlocals = in.read<std::uint8_t>("nlocals");
    if (body.nrets > 1) {
      throw Error(Errc::LimitExceeded, "function " + std::to_string(f) +
                                           " declares more than one result");
    }
    const auto ninstr = in.read<std::uint32_t>("ninstr");
    check_count(ninstr, kMaxInstructions, "instruction");
    if (ninstr > in.remaining() / 9) {
      throw Error(Errc::Truncated, "function " + std::to_string(f) +
                                       " body larger than input");
    }
    body.code.reserve(ninstr);
    for (std::uint32_t i = 0; i < ninstr; ++i) {
      const auto op = in.read<std::uint8_t>("opcode");
      const auto operand = in.read<std::int64_t>("operand");
      if (!is_opcode(op)) {
        throw Error(Errc::BadOpcode, "function " + std::to_string(f) +
                                         " instruction " + std::to_string(i) +
                                         ": unknown opcode " +
                                         std::to_string(op));
      }
      body.code.push_back(Instr{static_cast<Opcode>(op), operand});
    }
    m.functions.push_back(std::move(body));
  }

  const auto export_count = in.read<std::uint32_t>("export count");
  check_count(export_count, kMaxExports, "export");
  if (export_count > in.remaining() / 6) {
    throw Error(Errc::Truncated, "export table larger than input");
  }
  m.exports.reserve(export_count);
  for (std::uint32_t i = 0; i < export_count; ++i) {
    Export e;
    e.name = in.read_name("export name");
    e.function = in.read<std::uint32_t>("export index");
    m.exports.push_back(std::move(e));
  }
  if (in.remaining() != 0) {
    throw Error(Errc::TrailingBytes, std::to_string(in.remaining()) +
                                         " bytes after the export table");
  }
  return m;
}

std::vector<std::uint8_t> encode_module(const ModuleImage& image) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, image.version);
  put<std::uint32_t>(out, image.mem_pages);
  put<std::uint32_t>(out, image.max_pages);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.imports.size()));
  for (const auto& name : image.imports) put_name(out, name);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.functions.size()));
  for (const auto& f : image.functions) {
    put<std::uint8_t>(out, f.nargs);
    put<std::uint8_t>(out, f.nrets);
    put<std::uint8_t>(out, f.nlocals);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(f.code.size()));
    for (const auto& ins : f.code) {
      put<std::uint8_t>(out, static_cast<std::uint8_t>(ins.op));
      put<std::int64_t>(out, ins.operand);
    }
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.exports.size()));
  for (const auto& e : image.exports) {
    put_name(out, e.name);
    put<std::uint32_t>(out, e.function);
  }
  return out;
}

}  // namespace meshwa::msb
