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

#include "meshwa/ledger.hpp"

#include <algorithm>
#include <cstring>

#include "meshwa/error.hpp"

namespace meshwa {

struct Ledger::Object {
  ObjectHandle handle;
  std::uint64_t size = 0;
  std::string owner;
  std::vector<std::string> borrowers;  // sorted
  ObjectState state = ObjectState::Live;
  std::uint32_t destroy_count = 0;
  std::unique_ptr<std::byte[]> storage;
  std::vector<BindingId> bindings;
};

namespace {

bool range_fits(std::uint64_t offset, std::uint64_t len, std::uint64_t size) {
  return offset <= size && len <= size - offset;
}

std::string range_text(std::uint64_t offset, std::uint64_t len,
                       std::uint64_t size) {
  return "[" + std::to_string(offset) + ", " + std::to_string(offset) + "+" +
         std::to_string(len) + ") exceeds " + std::to_string(size) + " bytes";
}

}  // namespace

std::string_view object_state_name(ObjectState state) noexcept {
  switch (state) {
    case ObjectState::Live: return "Live";
    case ObjectState::PendingDestroy: return "PendingDestroy";
    case ObjectState::Destroyed: return "Destroyed";
  }
  return "Live";
}

Ledger::Ledger(ServiceCheck is_registered)
    : is_registered_(std::move(is_registered)) {}

Ledger::~Ledger() = default;

void Ledger::set_destroy_hook(DestroyHook hook) {
  std::lock_guard<std::mutex> lock(mu_);
  on_destroy_ = std::move(hook);
}

void Ledger::check_registered(std::string_view service) const {
  if (is_registered_ && !is_registered_(service)) {
    throw Error(Errc::UnknownService,
                std::string(service) + " is not a registered service");
  }
}

Ledger::Object& Ledger::lookup(ObjectHandle handle) {
  auto it = objects_.find(handle.id);
  if (it == objects_.end()) {
    throw Error(Errc::UnknownHandle,
                "no object with handle " + std::to_string(handle.id));
  }
  return *it->second;
}

const Ledger::Object& Ledger::lookup(ObjectHandle handle) const {
  return const_cast<Ledger*>(this)->lookup(handle);
}

bool Ledger::has_access(const Object& obj, std::string_view service) const {
  if (obj.state == ObjectState::Live && obj.owner == service) return true;
  return std::binary_search(obj.borrowers.begin(), obj.borrowers.end(),
                            service);
}

void Ledger::maybe_destroy(Object& obj) {
  if (obj.state != ObjectState::PendingDestroy || !obj.borrowers.empty()) {
    return;
  }
  obj.state = ObjectState::Destroyed;
  obj.storage.reset();
  ++obj.destroy_count;
  for (BindingId id : obj.bindings) bindings_[id].active = false;
  if (on_destroy_) on_destroy_(obj.handle);
}

ObjectHandle Ledger::create_object(std::string_view owner, std::uint64_t size) {
  if (size == 0) throw Error(Errc::ZeroSize, "object size must be >= 1");
  check_registered(owner);
  auto obj = std::make_unique<Object>();
  obj->size = size;
  obj->owner = std::string(owner);
  obj->storage.reset(new std::byte[size]());
  std::lock_guard<std::mutex> lock(mu_);
  obj->handle = ObjectHandle{next_handle_++};
  const ObjectHandle h = obj->handle;
  objects_.emplace(h.id, std::move(obj));
  return h;
}

void Ledger::transfer_ownership(ObjectHandle handle, std::string_view from,
                                std::string_view to) {
  std::lock_guard<std::mutex> lock(mu_);
  Object& obj = lookup(handle);
  if (obj.state != ObjectState::Live) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is " +
                    std::string(object_state_name(obj.state)));
  }
  if (obj.owner != from) {
    throw Error(Errc::NotOwner, std::string(from) + " does not own object " +
                                    std::to_string(handle.id));
  }
  check_registered(to);
  obj.owner = std::string(to);
}

BorrowToken Ledger::borrow(ObjectHandle handle, std::string_view service) {
  std::lock_guard<std::mutex> lock(mu_);
  Object& obj = lookup(handle);
  if (obj.state != ObjectState::Live) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is " +
                    std::string(object_state_name(obj.state)));
  }
  check_registered(service);
  obj.borrowers.insert(
      std::upper_bound(obj.borrowers.begin(), obj.borrowers.end(), service),
      std::string(service));
  const BorrowToken token{next_token_++};
  tokens_.emplace(token.id, Token{handle, std::string(service)});
  return token;
}

BorrowToken Ledger::borrow_for(ObjectHandle handle, std::string_view requester,
                               std::string_view borrower) {
  std::lock_guard<std::mutex> lock(mu_);
  Object& obj = lookup(handle);
  if (obj.state == ObjectState::Destroyed) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is Destroyed");
  }
  if (!has_access(obj, requester)) {
    throw Error(Errc::NotAuthorized,
                std::string(requester) + " holds no access to object " +
                    std::to_string(handle.id));
  }
  // A live borrow by the requester keeps a PendingDestroy object alive
  // for the duration, so pinning it for the callee is sound.
  obj.borrowers.insert(
      std::upper_bound(obj.borrowers.begin(), obj.borrowers.end(), borrower),
      std::string(borrower));
  const BorrowToken token{next_token_++};
  tokens_.emplace(token.id, Token{handle, std::string(borrower)});
  return token;
}

void Ledger::release(BorrowToken token) {
  std::lock_guard<std::mutex> lock(mu_);
  if (token.id == 0 || token.id >= next_token_) {
    throw Error(Errc::UnknownHandle,
                "no borrow token " + std::to_string(token.id));
  }
  auto it = tokens_.find(token.id);
  if (it == tokens_.end()) {
    throw Error(Errc::DoubleRelease,
                "borrow token " + std::to_string(token.id) +
                    " already released");
  }
  Object& obj = lookup(it->second.handle);
  auto pos = std::lower_bound(obj.borrowers.begin(), obj.borrowers.end(),
                              it->second.service);
  obj.borrowers.erase(pos);
  tokens_.erase(it);
  maybe_destroy(obj);
}

void Ledger::owner_release(ObjectHandle handle, std::string_view owner) {
  std::lock_guard<std::mutex> lock(mu_);
  Object& obj = lookup(handle);
  if (obj.state != ObjectState::Live) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is " +
                    std::string(object_state_name(obj.state)));
  }
  if (obj.owner != owner) {
    throw Error(Errc::NotOwner, std::string(owner) + " does not own object " +
                                    std::to_string(handle.id));
  }
  obj.state = ObjectState::PendingDestroy;
  maybe_destroy(obj);
}

ProxyBinding Ledger::grant_proxy(ObjectHandle handle, std::string_view granter,
                                 std::string_view grantee, std::uint8_t ops) {
  std::lock_guard<std::mutex> lock(mu_);
  Object& obj = lookup(handle);
  if (obj.state == ObjectState::Destroyed) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is Destroyed");
  }
  if (!has_access(obj, granter)) {
    throw Error(Errc::NotAuthorized,
                std::string(granter) + " is neither owner nor borrower of " +
                    "object " + std::to_string(handle.id));
  }
  check_registered(grantee);
  ops &= kProxyReadWrite;
  for (BindingId id : obj.bindings) {
    ProxyBinding& b = bindings_[id];
    if (b.grantee == grantee) {
      b.ops = ops;
      b.active = true;
      return b;
    }
  }
  ProxyBinding b{next_binding_++, handle, std::string(grantee), ops, true};
  obj.bindings.push_back(b.id);
  bindings_.emplace(b.id, b);
  return b;
}

void Ledger::revoke_proxy(BindingId binding) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = bindings_.find(binding);
  if (it == bindings_.end()) {
    throw Error(Errc::UnknownBinding,
                "no proxy binding " + std::to_string(binding));
  }
  it->second.active = false;
}

void Ledger::restore_binding(const ProxyBinding& snapshot) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = bindings_.find(snapshot.id);
  if (it == bindings_.end()) {
    throw Error(Errc::UnknownBinding,
                "no proxy binding " + std::to_string(snapshot.id));
  }
  const Object& obj = lookup(it->second.handle);
  it->second.ops = snapshot.ops;
  it->second.active = snapshot.active && obj.state != ObjectState::Destroyed;
}

std::optional<ProxyBinding> Ledger::binding(BindingId binding) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = bindings_.find(binding);
  if (it == bindings_.end()) return std::nullopt;
  return it->second;
}

std::optional<ProxyBinding> Ledger::find_binding(
    ObjectHandle handle, std::string_view grantee) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = objects_.find(handle.id);
  if (it == objects_.end()) return std::nullopt;
  for (BindingId id : it->second->bindings) {
    const ProxyBinding& b = bindings_.at(id);
    if (b.grantee == grantee) return b;
  }
  return std::nullopt;
}

ProxyBinding& Ledger::lookup_binding(BindingId id, std::string_view caller,
                                     std::uint8_t op) {
  auto it = bindings_.find(id);
  if (it == bindings_.end()) {
    throw Error(Errc::UnknownBinding, "no proxy binding " + std::to_string(id));
  }
  ProxyBinding& b = it->second;
  if (!b.active) {
    throw Error(Errc::Revoked,
                "proxy binding " + std::to_string(id) + " is revoked");
  }
  if (b.grantee != caller) {
    throw Error(Errc::NotAuthorized, std::string(caller) +
                                         " is not the grantee of binding " +
                                         std::to_string(id));
  }
  if ((b.ops & op) == 0) {
    throw Error(Errc::NotAuthorized,
                std::string("binding ") + std::to_string(id) + " does not permit " +
                    (op == kProxyRead ? "read" : "write"));
  }
  return b;
}

void Ledger::proxy_read(BindingId binding, std::string_view caller,
                        std::uint64_t obj_offset,
                        std::span<std::byte> grantee_mem,
                        std::uint64_t mem_offset, std::uint64_t len) {
  std::lock_guard<std::mutex> lock(mu_);
  const ProxyBinding& b = lookup_binding(binding, caller, kProxyRead);
  Object& obj = lookup(b.handle);
  if (!range_fits(obj_offset, len, obj.size)) {
    throw BoundsError(BoundsSide::Object, range_text(obj_offset, len, obj.size));
  }
  if (!range_fits(mem_offset, len, grantee_mem.size())) {
    throw BoundsError(BoundsSide::Grantee,
                      range_text(mem_offset, len, grantee_mem.size()));
  }
  if (len != 0) {
    std::memcpy(grantee_mem.data() + mem_offset, obj.storage.get() + obj_offset,
                len);
  }
}

void Ledger::proxy_write(BindingId binding, std::string_view caller,
                         std::uint64_t obj_offset,
                         std::span<const std::byte> grantee_mem,
                         std::uint64_t mem_offset, std::uint64_t len) {
  std::lock_guard<std::mutex> lock(mu_);
  const ProxyBinding& b = lookup_binding(binding, caller, kProxyWrite);
  Object& obj = lookup(b.handle);
  if (!range_fits(obj_offset, len, obj.size)) {
    throw BoundsError(BoundsSide::Object, range_text(obj_offset, len, obj.size));
  }
  if (!range_fits(mem_offset, len, grantee_mem.size())) {
    throw BoundsError(BoundsSide::Grantee,
                      range_text(mem_offset, len, grantee_mem.size()));
  }
  if (len != 0) {
    std::memcpy(obj.storage.get() + obj_offset, grantee_mem.data() + mem_offset,
                len);
  }
}

void Ledger::read(ObjectHandle handle, std::string_view service,
                  std::uint64_t offset, std::span<std::byte> out) const {
  std::lock_guard<std::mutex> lock(mu_);
  const Object& obj = lookup(handle);
  if (obj.state == ObjectState::Destroyed) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is Destroyed");
  }
  if (!has_access(obj, service)) {
    throw Error(Errc::NotAuthorized, std::string(service) +
                                         " holds no access to object " +
                                         std::to_string(handle.id));
  }
  if (!range_fits(offset, out.size(), obj.size)) {
    throw BoundsError(BoundsSide::Object,
                      range_text(offset, out.size(), obj.size));
  }
  if (!out.empty()) std::memcpy(out.data(), obj.storage.get() + offset, out.size());
}

void Ledger::write(ObjectHandle handle, std::string_view service,
                   std::uint64_t offset, std::span<const std::byte> in) {
  std::lock_guard<std::mutex> lock(mu_);
  Object& obj = lookup(handle);
  if (obj.state == ObjectState::Destroyed) {
    throw Error(Errc::AlreadyDestroyed,
                "object " + std::to_string(handle.id) + " is Destroyed");
  }
  if (!has_access(obj, service)) {
    throw Error(Errc::NotAuthorized, std::string(service) +
                                         " holds no access to object " +
                                         std::to_string(handle.id));
  }
  if (!range_fits(offset, in.size(), obj.size)) {
    throw BoundsError(BoundsSide::Object,
                      range_text(offset, in.size(), obj.size));
  }
  if (!in.empty()) std::memcpy(obj.storage.get() + offset, in.data(), in.size());
}

bool Ledger::can_access(ObjectHandle handle, std::string_view service) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = objects_.find(handle.id);
  if (it == objects_.end() || it->second->state == ObjectState::Destroyed) {
    return false;
  }
  return has_access(*it->second, service);
}

std::span<std::byte> Ledger::pinned_storage(BorrowToken token) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = tokens_.find(token.id);
  if (it == tokens_.end()) {
    throw Error(Errc::DoubleRelease,
                "borrow token " + std::to_string(token.id) + " not outstanding");
  }
  const Object& obj = lookup(it->second.handle);
  return {obj.storage.get(), static_cast<std::size_t>(obj.size)};
}

std::uint64_t Ledger::size(ObjectHandle handle) const {
  std::lock_guard<std::mutex> lock(mu_);
  return lookup(handle).size;
}

std::optional<LedgerEntry> Ledger::entry(ObjectHandle handle) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = objects_.find(handle.id);
  if (it == objects_.end()) return std::nullopt;
  const Object& obj = *it->second;
  return LedgerEntry{obj.handle,    obj.size,  obj.owner,
                     obj.borrowers, obj.state, obj.destroy_count};
}

}  // namespace meshwa
