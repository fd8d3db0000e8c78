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

#ifndef MESHWA_LEDGER_HPP_
#define MESHWA_LEDGER_HPP_

// Shared byte objects living outside every service region, with an
// ownership ledger (one owner, counted borrows, exactly-once destruction)
// and proxy bindings that let a grantee copy to and from an object
// without the object ever being mapped into its memory.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "meshwa/service.hpp"

namespace meshwa {

struct BorrowToken {
  std::uint64_t id = 0;
  auto operator<=>(const BorrowToken&) const = default;
};

enum class ObjectState : std::uint8_t { Live, PendingDestroy, Destroyed };

std::string_view object_state_name(ObjectState state) noexcept;

using BindingId = std::uint64_t;

enum ProxyOps : std::uint8_t {
  kProxyRead = 1,
  kProxyWrite = 2,
  kProxyReadWrite = kProxyRead | kProxyWrite,
};

struct ProxyBinding {
  BindingId id = 0;
  ObjectHandle handle;
  std::string grantee;
  std::uint8_t ops = 0;
  bool active = false;
};

struct LedgerEntry {
  ObjectHandle handle;
  std::uint64_t size = 0;
  std::string owner;
  std::vector<std::string> borrowers;  // sorted multiset
  ObjectState state = ObjectState::Live;
  std::uint32_t destroy_count = 0;
};

class Ledger {
 public:
  // Answers "is this a registered service"; an empty check accepts all.
  using ServiceCheck = std::function<bool(std::string_view)>;
  // Runs under the ledger lock exactly once per object.
  using DestroyHook = std::function<void(ObjectHandle)>;

  explicit Ledger(ServiceCheck is_registered = {});
  ~Ledger();

  ObjectHandle create_object(std::string_view owner, std::uint64_t size);
  void transfer_ownership(ObjectHandle handle, std::string_view from,
                          std::string_view to);
  BorrowToken borrow(ObjectHandle handle, std::string_view service);
  void release(BorrowToken token);
  // The owner gives the object up; it is destroyed once no borrows remain.
  void owner_release(ObjectHandle handle, std::string_view owner);

  // granter must be the owner or hold a borrow. Re-granting to the same
  // grantee updates the existing binding.
  ProxyBinding grant_proxy(ObjectHandle handle, std::string_view granter,
                           std::string_view grantee, std::uint8_t ops);
  void revoke_proxy(BindingId binding);
  std::optional<ProxyBinding> binding(BindingId binding) const;
  std::optional<ProxyBinding> find_binding(ObjectHandle handle,
                                           std::string_view grantee) const;
  // Puts a binding back to an earlier snapshot of its ops and state.
  void restore_binding(const ProxyBinding& snapshot);

  // Copies between the object and the grantee's memory. caller must be the
  // binding's grantee.
  void proxy_read(BindingId binding, std::string_view caller,
                  std::uint64_t obj_offset, std::span<std::byte> grantee_mem,
                  std::uint64_t mem_offset, std::uint64_t len);
  void proxy_write(BindingId binding, std::string_view caller,
                   std::uint64_t obj_offset,
                   std::span<const std::byte> grantee_mem,
                   std::uint64_t mem_offset, std::uint64_t len);

  // Direct access for the owner or a borrower.
  void read(ObjectHandle handle, std::string_view service,
            std::uint64_t offset, std::span<std::byte> out) const;
  void write(ObjectHandle handle, std::string_view service,
             std::uint64_t offset, std::span<const std::byte> in);

  bool can_access(ObjectHandle handle, std::string_view service) const;

  // Borrow on behalf of `borrower`, provided `requester` may access the
  // object. Used by call dispatch to pin a payload for the callee.
  BorrowToken borrow_for(ObjectHandle handle, std::string_view requester,
                         std::string_view borrower);
  // Storage of a borrowed object; valid until the token is released.
  std::span<std::byte> pinned_storage(BorrowToken token) const;

  std::uint64_t size(ObjectHandle handle) const;
  std::optional<LedgerEntry> entry(ObjectHandle handle) const;
  void set_destroy_hook(DestroyHook hook);

 private:
  struct Object;
  struct Token {
    ObjectHandle handle;
    std::string service;
  };

  Object& lookup(ObjectHandle handle);
  const Object& lookup(ObjectHandle handle) const;
  bool has_access(const Object& obj, std::string_view service) const;
  void maybe_destroy(Object& obj);
  void check_registered(std::string_view service) const;
  ProxyBinding& lookup_binding(BindingId id, std::string_view caller,
                               std::uint8_t op);

  ServiceCheck is_registered_;
  DestroyHook on_destroy_;
  mutable std::mutex mu_;
  std::uint64_t next_handle_ = 1;
  std::uint64_t next_token_ = 1;
  BindingId next_binding_ = 1;
  std::unordered_map<std::uint64_t, std::unique_ptr<Object>> objects_;
  std::unordered_map<std::uint64_t, Token> tokens_;  // outstanding only
  std::unordered_map<BindingId, ProxyBinding> bindings_;
};

}  // namespace meshwa

#endif  // MESHWA_LEDGER_HPP_
