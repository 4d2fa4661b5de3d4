#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgasim/addressing.hpp"
#include "pgasim/errors.hpp"

namespace pgasim {

enum class Region : std::uint8_t { Shared, Private };

inline constexpr std::uint64_t kDefaultMediumScratch = 64 * 1024;

/// Per-node byte-addressable memory: the node's slice of the global shared
/// segment plus a private region. Medium-message payloads land in a ring
/// allocator at the top of the private region. All accesses bounds-checked;
/// contents start zeroed.
class NodeMemory {
 public:
  NodeMemory(const SegmentLayout& layout,
             std::uint64_t medium_scratch = kDefaultMediumScratch);

  std::vector<std::uint8_t> dma_read(Region region, std::uint64_t offset,
                                     std::uint64_t len) const;
  void dma_read_into(Region region, std::uint64_t offset,
                     std::span<std::uint8_t> out) const;
  void dma_write(Region region, std::uint64_t offset,
                 std::span<const std::uint8_t> bytes);

  std::uint64_t size(Region region) const;
  std::uint64_t shared_size() const { return shared_.size(); }
  std::uint64_t private_size() const { return private_.size(); }

  /// Medium scratch ring inside private memory: [scratch_base, private_size).
  std::uint64_t scratch_base() const { return scratch_base_; }
  std::uint64_t scratch_size() const { return scratch_size_; }

  /// Reserves `len` contiguous scratch bytes, wrapping at the ring end.
  /// The allocation is only valid until the ring laps it.
  std::uint64_t scratch_alloc(std::uint64_t len);

  /// Direct views for compute kernels; bounds are the span size.
  std::span<std::uint8_t> view(Region region);
  std::span<const std::uint8_t> view(Region region) const;

 private:
  void check(Region region, std::uint64_t offset, std::uint64_t len) const;

  std::vector<std::uint8_t> shared_;
  std::vector<std::uint8_t> private_;
  std::uint64_t scratch_base_ = 0;
  std::uint64_t scratch_size_ = 0;
  std::uint64_t scratch_next_ = 0;
};

}  // namespace pgasim
