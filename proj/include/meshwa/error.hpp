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

#ifndef MESHWA_ERROR_HPP_
#define MESHWA_ERROR_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace meshwa {

// Sandbox traps abort the current invocation only.
enum class TrapKind : std::uint8_t {
  OutOfBounds,
  StackOverflow,
  CallDepthExceeded,
  UnreachableImport,
  GrowFailed,
  DivByZero,  // reserved, no opcode raises it yet
  OutOfFuel,
};

std::string_view trap_name(TrapKind kind) noexcept;

enum class Errc : std::uint16_t {
  // manifest
  Syntax,
  Schema,
  // module decoding
  BadMagic,
  BadVersion,
  Truncated,
  LimitExceeded,
  BadOpcode,
  BadImport,
  TrailingBytes,
  // verification, instantiation, invocation
  Verify,
  BindingArity,
  RegionTooSmall,
  RegionInUse,
  ExportNotFound,
  ArityMismatch,
  // sasmem
  ZeroSize,
  OutOfArena,
  UnknownOwner,
  DuplicateOwner,
  InvalidArena,
  OffsetOutOfRegion,
  InvalidMode,
  // registry
  DuplicateName,
  EmptyExports,
  NotFound,
  UnknownCaller,
  UnknownService,
  // xcall
  ServiceGone,
  SlotOutOfRange,
  CalleeTrapped,
  NotOwner,
  UnknownHandle,
  AlreadyDestroyed,
  DoubleRelease,
  NotAuthorized,
  Revoked,
  OutOfBounds,
  UnknownBinding,
  PayloadTooLarge,
  // mesh
  UnknownEndpoint,
  ProxyMissingExport,
  ProxyTrapped,
  UnknownEdge,
  InvalidPolicy,
  // bench
  ZeroIterations,
  InvalidWorkload,
  SpawnFailure,
  SocketError,
  ChildCrashed,
  ZeroTotalTime,
  EmptyReportSet,
  // deployment
  Validation,
  Provenance,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<TrapKind> trap = std::nullopt);

  Errc code() const noexcept { return code_; }
  // Set for CalleeTrapped / ProxyTrapped.
  std::optional<TrapKind> trap() const noexcept { return trap_; }

 private:
  Errc code_;
  std::optional<TrapKind> trap_;
};

// Manifest schema failure, located by JSON pointer.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& message);
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

class VerifyError : public Error {
 public:
  VerifyError(char rule, std::uint32_t function, std::uint32_t instruction,
              const std::string& message);
  char rule() const noexcept { return rule_; }
  std::uint32_t function() const noexcept { return function_; }
  std::uint32_t instruction() const noexcept { return instruction_; }

 private:
  char rule_;
  std::uint32_t function_;
  std::uint32_t instruction_;
};

enum class BoundsSide : std::uint8_t { Object, Grantee };

class BoundsError : public Error {
 public:
  BoundsError(BoundsSide side, const std::string& message);
  BoundsSide side() const noexcept { return side_; }

 private:
  BoundsSide side_;
};

class ChildCrashedError : public Error {
 public:
  ChildCrashedError(std::string child, const std::string& message);
  const std::string& child() const noexcept { return child_; }

 private:
  std::string child_;
};

}  // namespace meshwa

#endif  // MESHWA_ERROR_HPP_
