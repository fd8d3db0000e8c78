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

#include "meshwa/sasmem.hpp"

#include <sys/mman.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <list>
#include <unordered_map>
#include <unordered_set>

#include "meshwa/error.hpp"

namespace meshwa::sasmem {

std::uint64_t region_length_for(std::uint64_t size) {
  if (size == 0) throw Error(Errc::ZeroSize, "region size must be >= 1");
  if (size > (std::uint64_t{1} << 63)) {
    throw Error(Errc::OutOfArena, "region size too large");
  }
  return std::max(std::bit_ceil(size), kMinRegion);
}

BuddyAllocator::BuddyAllocator(std::uint64_t arena_size)
    : arena_size_(arena_size) {
  if (arena_size < kMinRegion || !std::has_single_bit(arena_size)) {
    throw Error(Errc::InvalidArena,
                "arena size must be a power of two >= 64 KiB, got " +
                    std::to_string(arena_size));
  }
  top_class_ = static_cast<std::uint32_t>(std::countr_zero(arena_size));
  free_[top_class_].insert(0);
}

Region BuddyAllocator::allocate(std::string owner, std::uint64_t size) {
  const std::uint64_t length = region_length_for(size);
  if (allocated_.count(owner) != 0) {
    throw Error(Errc::DuplicateOwner, owner + " already owns a region");
  }
  const auto want = static_cast<std::uint32_t>(std::countr_zero(length));
  if (want > top_class_) {
    throw Error(Errc::OutOfArena, "no free block of " +
                                      std::to_string(length) + " bytes");
  }
  std::uint32_t cls = want;
  while (cls <= top_class_) {
    auto it = free_.find(cls);
    if (it != free_.end() && !it->second.empty()) break;
    ++cls;
  }
  if (cls > top_class_) {
    throw Error(Errc::OutOfArena, "no free block of " +
                                      std::to_string(length) + " bytes");
  }
  auto& from = free_[cls];
  std::uint64_t base = *from.begin();
  from.erase(from.begin());
  if (from.empty()) free_.erase(cls);
  // Split, keeping the lower half and freeing the upper buddy each time.
  while (cls > want) {
    --cls;
    free_[cls].insert(base + (std::uint64_t{1} << cls));
  }
  Region r{base, length, owner, want};
  allocated_.emplace(std::move(owner), r);
  return r;
}

void BuddyAllocator::free(std::string_view owner) {
  auto it = allocated_.find(owner);
  if (it == allocated_.end()) {
    throw Error(Errc::UnknownOwner, std::string(owner) + " owns no region");
  }
  std::uint64_t base = it->second.base;
  std::uint32_t cls = it->second.bucket_class;
  allocated_.erase(it);
  while (cls < top_class_) {
    const std::uint64_t buddy = base ^ (std::uint64_t{1} << cls);
    auto fl = free_.find(cls);
    if (fl == free_.end() || fl->second.erase(buddy) == 0) break;
    if (fl->second.empty()) free_.erase(fl);
    base = std::min(base, buddy);
    ++cls;
  }
  free_[cls].insert(base);
}

std::map<std::uint32_t, BucketCensus> BuddyAllocator::fragmentation_report()
    const {
  std::map<std::uint32_t, BucketCensus> out;
  for (const auto& [cls, bases] : free_) {
    if (!bases.empty()) out[cls].free_blocks += bases.size();
  }
  for (const auto& [owner, r] : allocated_) {
    out[r.bucket_class].allocated_blocks += 1;
  }
  return out;
}

const Region* BuddyAllocator::find(std::string_view owner) const {
  auto it = allocated_.find(owner);
  return it == allocated_.end() ? nullptr : &it->second;
}

std::vector<Region> BuddyAllocator::regions() const {
  std::vector<Region> out;
  out.reserve(allocated_.size());
  for (const auto& [owner, r] : allocated_) out.push_back(r);
  return out;
}

std::uint64_t BuddyAllocator::free_bytes() const noexcept {
  std::uint64_t total = 0;
  for (const auto& [cls, bases] : free_) {
    total += bases.size() * (std::uint64_t{1} << cls);
  }
  return total;
}

std::uint64_t BuddyAllocator::allocated_bytes() const noexcept {
  std::uint64_t total = 0;
  for (const auto& [owner, r] : allocated_) total += r.length;
  return total;
}

Arena::Arena(std::uint64_t arena_size) : size_(arena_size), alloc_(arena_size) {
  void* p = ::mmap(nullptr, arena_size, PROT_READ | PROT_WRITE,
                   MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
  if (p == MAP_FAILED) {
    throw Error(Errc::InvalidArena, "cannot reserve arena of " +
                                        std::to_string(arena_size) +
                                        " bytes: " + std::strerror(errno));
  }
  base_ = static_cast<std::byte*>(p);
}

Arena::~Arena() {
  if (base_ != nullptr) ::munmap(base_, size_);
}

Region Arena::allocate(std::string owner, std::uint64_t size) {
  std::lock_guard<std::mutex> lock(mu_);
  return alloc_.allocate(std::move(owner), size);
}

void Arena::free(std::string_view owner) {
  std::lock_guard<std::mutex> lock(mu_);
  const Region* r = alloc_.find(owner);
  if (r != nullptr) {
    // Drop the physical pages; the range reads back as zeros.
    ::madvise(base_ + r->base, r->length, MADV_DONTNEED);
  }
  alloc_.free(owner);
}

std::span<std::byte> Arena::bytes(const Region& region) const {
  return {base_ + region.base, region.length};
}

std::map<std::uint32_t, BucketCensus> Arena::fragmentation_report() const {
  std::lock_guard<std::mutex> lock(mu_);
  return alloc_.fragmentation_report();
}

std::vector<Region> Arena::regions() const {
  std::lock_guard<std::mutex> lock(mu_);
  return alloc_.regions();
}

namespace {

class LruTlb {
 public:
  explicit LruTlb(std::uint32_t capacity) : capacity_(capacity) {
    index_.reserve(capacity * 2u);
  }

  // True on hit. On miss the page is inserted, evicting the LRU entry.
  bool access(std::uint64_t page) {
    auto it = index_.find(page);
    if (it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return true;
    }
    if (order_.size() == capacity_) {
      index_.erase(order_.back());
      order_.pop_back();
    }
    order_.push_front(page);
    index_.emplace(page, order_.begin());
    return false;
  }

 private:
  std::uint32_t capacity_;
  std::list<std::uint64_t> order_;  // front = most recent
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> index_;
};

}  // namespace

TranslationStats simulate_translation(std::span<const std::uint64_t> trace,
                                      const Region& region,
                                      const TranslationMode& mode) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i] >= region.length) {
      throw Error(Errc::OffsetOutOfRegion,
                  "trace[" + std::to_string(i) + "] = " +
                      std::to_string(trace[i]) + " outside region of " +
                      std::to_string(region.length) + " bytes");
    }
  }
  TranslationStats stats;
  stats.accesses = trace.size();

  if (std::holds_alternative<StaticSegment>(mode)) {
    stats.tlb_hits = stats.accesses;
    stats.distinct_pages = trace.empty() ? 0 : 1;
    return stats;
  }

  const auto& paged = std::get<PagedTlb>(mode);
  if (paged.tlb_entries == 0) {
    throw Error(Errc::InvalidMode, "tlb_entries must be >= 1");
  }
  if (!std::has_single_bit(paged.page_size) ||
      region.length % paged.page_size != 0) {
    throw Error(Errc::InvalidMode,
                "page size must be a power of two dividing the region length");
  }
  const int shift = std::countr_zero(paged.page_size);
  LruTlb tlb(paged.tlb_entries);
  std::unordered_set<std::uint64_t> seen;
  for (std::uint64_t offset : trace) {
    const std::uint64_t page = offset >> shift;
    seen.insert(page);
    if (tlb.access(page)) {
      ++stats.tlb_hits;
    } else {
      ++stats.page_walks;
    }
  }
  stats.distinct_pages = seen.size();
  return stats;
}

std::string translation_csv_row(const TranslationMode& mode,
                                const TranslationStats& stats) {
  std::string name = std::holds_alternative<StaticSegment>(mode)
                         ? "static_segment"
                         : "paged_tlb";
  return name + "," + std::to_string(stats.accesses) + "," +
         std::to_string(stats.tlb_hits) + "," +
         std::to_string(stats.page_walks) + "," +
         std::to_string(stats.distinct_pages);
}

}  // namespace meshwa::sasmem
