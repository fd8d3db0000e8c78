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

#include "meshwa/error.hpp"

namespace meshwa {

std::string_view trap_name(TrapKind kind) noexcept {
  switch (kind) {
    case TrapKind::OutOfBounds: return "OutOfBounds";
    case TrapKind::StackOverflow: return "StackOverflow";
    case TrapKind::CallDepthExceeded: return "CallDepthExceeded";
    case TrapKind::UnreachableImport: return "UnreachableImport";
    case TrapKind::GrowFailed: return "GrowFailed";
    case TrapKind::DivByZero: return "DivByZero";
    case TrapKind::OutOfFuel: return "OutOfFuel";
  }
  return "Unknown";
}

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
#define MESHWA_ERRC(name) \
  case Errc::name:        \
    return #name;
    MESHWA_ERRC(Syntax)
    MESHWA_ERRC(Schema)
    MESHWA_ERRC(BadMagic)
    MESHWA_ERRC(BadVersion)
    MESHWA_ERRC(Truncated)
    MESHWA_ERRC(LimitExceeded)
    MESHWA_ERRC(BadOpcode)
    MESHWA_ERRC(BadImport)
    MESHWA_ERRC(TrailingBytes)
    MESHWA_ERRC(Verify)
    MESHWA_ERRC(BindingArity)
    MESHWA_ERRC(RegionTooSmall)
    MESHWA_ERRC(RegionInUse)
    MESHWA_ERRC(ExportNotFound)
    MESHWA_ERRC(ArityMismatch)
    MESHWA_ERRC(ZeroSize)
    MESHWA_ERRC(OutOfArena)
    MESHWA_ERRC(UnknownOwner)
    MESHWA_ERRC(DuplicateOwner)
    MESHWA_ERRC(InvalidArena)
    MESHWA_ERRC(OffsetOutOfRegion)
    MESHWA_ERRC(InvalidMode)
    MESHWA_ERRC(DuplicateName)
    MESHWA_ERRC(EmptyExports)
    MESHWA_ERRC(NotFound)
    MESHWA_ERRC(UnknownCaller)
    MESHWA_ERRC(UnknownService)
    MESHWA_ERRC(ServiceGone)
    MESHWA_ERRC(SlotOutOfRange)
    MESHWA_ERRC(CalleeTrapped)
    MESHWA_ERRC(NotOwner)
    MESHWA_ERRC(UnknownHandle)
    MESHWA_ERRC(AlreadyDestroyed)
    MESHWA_ERRC(DoubleRelease)
    MESHWA_ERRC(NotAuthorized)
    MESHWA_ERRC(Revoked)
    MESHWA_ERRC(OutOfBounds)
    MESHWA_ERRC(UnknownBinding)
    MESHWA_ERRC(PayloadTooLarge)
    MESHWA_ERRC(UnknownEndpoint)
    MESHWA_ERRC(ProxyMissingExport)
    MESHWA_ERRC(ProxyTrapped)
    MESHWA_ERRC(UnknownEdge)
    MESHWA_ERRC(InvalidPolicy)
    MESHWA_ERRC(ZeroIterations)
    MESHWA_ERRC(InvalidWorkload)
    MESHWA_ERRC(SpawnFailure)
    MESHWA_ERRC(SocketError)
    MESHWA_ERRC(ChildCrashed)
    MESHWA_ERRC(ZeroTotalTime)
    MESHWA_ERRC(EmptyReportSet)
    MESHWA_ERRC(Validation)
    MESHWA_ERRC(Provenance)
    MESHWA_ERRC(Io)
#undef MESHWA_ERRC
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message,
             std::optional<TrapKind> trap)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code),
      trap_(trap) {}

SchemaError::SchemaError(std::string pointer, const std::string& message)
    : Error(Errc::Schema, (pointer.empty() ? std::string("/") : pointer) +
                              ": " + message),
      pointer_(std::move(pointer)) {}

VerifyError::VerifyError(char rule, std::uint32_t function,
                         std::uint32_t instruction, const std::string& message)
    : Error(Errc::Verify, std::string("rule (") + rule + ") function " +
                              std::to_string(function) + " instruction " +
                              std::to_string(instruction) + ": " + message),
      rule_(rule),
      function_(function),
      instruction_(instruction) {}

BoundsError::BoundsError(BoundsSide side, const std::string& message)
    : Error(Errc::OutOfBounds,
            std::string(side == BoundsSide::Object ? "object" : "grantee") +
                " range: " + message),
      side_(side) {}

ChildCrashedError::ChildCrashedError(std::string child,
                                     const std::string& message)
    : Error(Errc::ChildCrashed, child + ": " + message),
      child_(std::move(child)) {}

}  // namespace meshwa
