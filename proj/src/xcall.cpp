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

#include "meshwa/xcall.hpp"

#include <chrono>
#include <cstring>

#include "meshwa/error.hpp"
#include "meshwa/msb.hpp"

namespace meshwa {
namespace {

class DirectView final : public PayloadView {
 public:
  DirectView(std::span<std::byte> bytes, bool writable)
      : bytes_(bytes), writable_(writable) {}

  std::uint64_t size() const override { return bytes_.size(); }
  void read(std::uint64_t offset, std::span<std::byte> out) const override {
    check(offset, out.size());
    if (!out.empty()) std::memcpy(out.data(), bytes_.data() + offset, out.size());
  }
  void write(std::uint64_t offset, std::span<const std::byte> in) override {
    if (!writable_) throw Error(Errc::NotAuthorized, "payload is read-only");
    check(offset, in.size());
    if (!in.empty()) std::memcpy(bytes_.data() + offset, in.data(), in.size());
  }
  bool writable() const override { return writable_; }

 private:
  void check(std::uint64_t offset, std::uint64_t len) const {
    if (offset > bytes_.size() || len > bytes_.size() - offset) {
      throw BoundsError(BoundsSide::Object, "payload access out of range");
    }
  }

  std::span<std::byte> bytes_;
  bool writable_;
};

class ProxyView final : public PayloadView {
 public:
  ProxyView(Ledger& ledger, BindingId binding, std::string_view grantee,
            std::uint64_t size, bool writable)
      : ledger_(ledger),
        binding_(binding),
        grantee_(grantee),
        size_(size),
        writable_(writable) {}

  std::uint64_t size() const override { return size_; }
  void read(std::uint64_t offset, std::span<std::byte> out) const override {
    ledger_.proxy_read(binding_, grantee_, offset, out, 0, out.size());
  }
  void write(std::uint64_t offset, std::span<const std::byte> in) override {
    ledger_.proxy_write(binding_, grantee_, offset, in, 0, in.size());
  }
  bool writable() const override { return writable_; }

 private:
  Ledger& ledger_;
  BindingId binding_;
  std::string_view grantee_;
  std::uint64_t size_;
  bool writable_;
};

class BorrowGuard {
 public:
  BorrowGuard(Ledger& ledger, BorrowToken token)
      : ledger_(ledger), token_(token) {}
  ~BorrowGuard() {
    try {
      ledger_.release(token_);
    } catch (...) {
    }
  }
  BorrowToken token() const noexcept { return token_; }

 private:
  Ledger& ledger_;
  BorrowToken token_;
};

// Proxy binding held by the callee for the duration of one call.
class ScopedGrant {
 public:
  ScopedGrant(Ledger& ledger, ObjectHandle handle, std::string_view granter,
              std::string_view grantee, std::uint8_t ops)
      : ledger_(ledger), previous_(ledger.find_binding(handle, grantee)) {
    binding_ = ledger.grant_proxy(handle, granter, grantee, ops).id;
  }
  ~ScopedGrant() {
    try {
      if (previous_) {
        ledger_.restore_binding(*previous_);
      } else {
        ledger_.revoke_proxy(binding_);
      }
    } catch (...) {
    }
  }
  BindingId id() const noexcept { return binding_; }

 private:
  Ledger& ledger_;
  std::optional<ProxyBinding> previous_;
  BindingId binding_ = 0;
};

}  // namespace

std::uint64_t monotonic_ns() noexcept {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

void CallRecorder::add(CallRecord record) {
  std::lock_guard<std::mutex> lock(mu_);
  if (records_.size() >= capacity_) {
    ++dropped_;
    return;
  }
  records_.push_back(std::move(record));
}

std::vector<CallRecord> CallRecorder::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::uint64_t CallRecorder::dropped() const {
  std::lock_guard<std::mutex> lock(mu_);
  return dropped_;
}

void CallRecorder::clear() {
  std::lock_guard<std::mutex> lock(mu_);
  records_.clear();
  dropped_ = 0;
}

std::string CallRecorder::csv() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::string out(kCallRecordCsvHeader);
  out += '\n';
  for (const auto& r : records_) {
    out += r.caller + ',' + r.callee + ',' + r.export_name + ',' +
           std::string(binding_name(r.binding)) + ',' +
           std::to_string(r.payload_bytes) + ',' +
           std::to_string(r.end_ns - r.start_ns) + '\n';
  }
  return out;
}

std::optional<Value> DirectTarget::dispatch(const CallEnv& env) const {
  return env.xcall.invoke(*callee_, export_index_, binding_, env.caller,
                          env.args, env.payload);
}

std::optional<Value> Xcall::call(std::string_view caller, FunctionTable& table,
                                 std::size_t slot, std::span<const Value> args,
                                 std::optional<ObjectHandle> payload) {
  if (caller != table.owner()) {
    throw Error(Errc::NotAuthorized, std::string(caller) +
                                         " does not own the table of " +
                                         table.owner());
  }
  if (slot >= table.size()) {
    throw Error(Errc::SlotOutOfRange, "slot " + std::to_string(slot) +
                                          " of table " + table.owner() +
                                          "->" + table.target() + " with " +
                                          std::to_string(table.size()) +
                                          " slots");
  }
  const TableSlot& s = table.slot(slot);
  const bool record = recorder_.enabled();
  const std::uint64_t start = record ? monotonic_ns() : 0;
  const CallEnv env{*this, caller, table, slot, args, payload};
  std::optional<Value> result = s.load()->dispatch(env);
  if (record) {
    recorder_.add(CallRecord{std::string(caller), table.target(),
                             s.export_name, s.binding,
                             payload ? ledger_.size(*payload) : 0, start,
                             monotonic_ns()});
  }
  return result;
}

std::optional<Value> Xcall::invoke(ServiceEntry& callee,
                                   std::uint32_t export_index,
                                   BindingMode mode, std::string_view caller,
                                   std::span<const Value> args,
                                   std::optional<ObjectHandle> payload,
                                   PayloadAccess access,
                                   const Interception* interception) {
  if (!callee.alive.load(std::memory_order_acquire)) {
    throw Error(Errc::ServiceGone, callee.name + " was unregistered");
  }
  std::optional<msb::CallDepthScope> depth;
  try {
    depth.emplace();
  } catch (const msb::HostTrap& t) {
    throw Error(Errc::CalleeTrapped,
                "call depth cap reached calling " + callee.name, t.kind);
  }
  std::lock_guard<std::recursive_mutex> gate(callee.gate);
  if (!callee.alive.load(std::memory_order_acquire) || !callee.impl) {
    throw Error(Errc::ServiceGone, callee.name + " was unregistered");
  }

  CallFrame frame;
  frame.xcall = this;
  frame.self = callee.name;
  frame.caller = caller;
  frame.args = args;
  frame.binding = mode;
  frame.interception = interception;
  if (!payload) return callee.impl->call(export_index, frame);

  const bool writable = access == PayloadAccess::ReadWrite;
  BorrowGuard borrow(ledger_, ledger_.borrow_for(*payload, caller, callee.name));
  frame.payload = payload;
  switch (mode) {
    case BindingMode::DirectCall: {
      DirectView view(ledger_.pinned_storage(borrow.token()), writable);
      frame.payload_view = &view;
      frame.payload_ref = 0;
      return callee.impl->call(export_index, frame);
    }
    case BindingMode::ProxyMediated: {
      ScopedGrant grant(ledger_, *payload, caller, callee.name,
                        writable ? kProxyReadWrite : kProxyRead);
      ProxyView view(ledger_, grant.id(), callee.name, ledger_.size(*payload),
                     writable);
      frame.payload_view = &view;
      frame.payload_ref = -static_cast<Value>(grant.id());
      return callee.impl->call(export_index, frame);
    }
    case BindingMode::CopyInOut: {
      const std::uint64_t size = ledger_.size(*payload);
      std::span<std::byte> window = callee.impl->io_window();
      if (size > window.size()) {
        throw Error(Errc::PayloadTooLarge,
                    std::to_string(size) + "-byte payload does not fit the " +
                        std::to_string(window.size()) + "-byte window of " +
                        callee.name);
      }
      window = window.first(static_cast<std::size_t>(size));
      ledger_.read(*payload, callee.name, 0, window);
      DirectView view(window, writable);
      frame.payload_view = &view;
      frame.payload_ref = 0;
      std::optional<Value> result = callee.impl->call(export_index, frame);
      if (writable) ledger_.write(*payload, callee.name, 0, window);
      return result;
    }
  }
  return std::nullopt;
}

}  // namespace meshwa
