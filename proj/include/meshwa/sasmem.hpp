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

#ifndef MESHWA_SASMEM_HPP_
#define MESHWA_SASMEM_HPP_

// Single-address-space memory: one contiguous arena carved into
// power-of-two regions by a buddy allocator, plus a translation cost
// model comparing paged TLB lookup with a static segment mapping.

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace meshwa::sasmem {

inline constexpr std::uint32_t kMinBucketClass = 16;  // 64 KiB
inline constexpr std::uint64_t kMinRegion = std::uint64_t{1} << kMinBucketClass;

struct Region {
  std::uint64_t base = 0;    // byte offset inside the arena
  std::uint64_t length = 0;  // power of two, >= kMinRegion
  std::string owner;
  std::uint32_t bucket_class = 0;  // log2(length)

  bool operator==(const Region&) const = default;
};

struct BucketCensus {
  std::uint64_t free_blocks = 0;
  std::uint64_t allocated_blocks = 0;

  bool operator==(const BucketCensus&) const = default;
};

// Smallest power of two >= max(size, kMinRegion). size must be >= 1.
std::uint64_t region_length_for(std::uint64_t size);

// Buddy allocator state. Not synchronized; see Arena.
class BuddyAllocator {
 public:
  // arena_size must be a power of two >= kMinRegion.
  explicit BuddyAllocator(std::uint64_t arena_size);

  Region allocate(std::string owner, std::uint64_t size);
  void free(std::string_view owner);

  std::map<std::uint32_t, BucketCensus> fragmentation_report() const;

  const Region* find(std::string_view owner) const;
  std::vector<Region> regions() const;

  std::uint64_t arena_size() const noexcept { return arena_size_; }
  std::uint64_t free_bytes() const noexcept;
  std::uint64_t allocated_bytes() const noexcept;

  bool operator==(const BuddyAllocator&) const = default;

 private:
  std::uint64_t arena_size_;
  std::uint32_t top_class_;
  // class -> base offsets of free blocks (ordered: lowest base wins)
  std::map<std::uint32_t, std::set<std::uint64_t>> free_;
  std::map<std::string, Region, std::less<>> allocated_;
};

// A reserved host address range backing a BuddyAllocator. Allocation and
// release are serialized by an internal lock.
class Arena {
 public:
  explicit Arena(std::uint64_t arena_size);
  ~Arena();
  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;

  Region allocate(std::string owner, std::uint64_t size);
  void free(std::string_view owner);

  // Host bytes of a region returned by this arena.
  std::span<std::byte> bytes(const Region& region) const;
  std::span<std::byte> whole() const { return {base_, size_}; }

  std::map<std::uint32_t, BucketCensus> fragmentation_report() const;
  std::vector<Region> regions() const;
  std::uint64_t size() const noexcept { return size_; }

 private:
  std::byte* base_ = nullptr;
  std::uint64_t size_ = 0;
  mutable std::mutex mu_;
  BuddyAllocator alloc_;
};

// Fully associative, LRU-replaced TLB over fixed-size pages.
struct PagedTlb {
  std::uint64_t page_size = 4096;
  std::uint32_t tlb_entries = 64;
};

// The region is translated by one statically configured mapping.
struct StaticSegment {};

using TranslationMode = std::variant<PagedTlb, StaticSegment>;

struct TranslationStats {
  std::uint64_t accesses = 0;
  std::uint64_t tlb_hits = 0;
  std::uint64_t page_walks = 0;
  std::uint64_t distinct_pages = 0;

  bool operator==(const TranslationStats&) const = default;
};

TranslationStats simulate_translation(std::span<const std::uint64_t> trace,
                                      const Region& region,
                                      const TranslationMode& mode);

inline constexpr std::string_view kTranslationCsvHeader =
    "mode,accesses,tlb_hits,page_walks,distinct_pages";

std::string translation_csv_row(const TranslationMode& mode,
                                const TranslationStats& stats);

}  // namespace meshwa::sasmem

#endif  // MESHWA_SASMEM_HPP_
