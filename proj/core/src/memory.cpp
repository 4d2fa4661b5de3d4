#include "pgasim/memory.hpp"

#include <cstring>
#include <string>

namespace pgasim {

NodeMemory::NodeMemory(const SegmentLayout& layout, std::uint64_t medium_scratch) {
  validate_layout(layout, 1);
  if (medium_scratch > layout.private_size) {
    fail(ErrorCode::InvalidLayout, "medium scratch larger than private region");
  }
  shared_.assign(layout.shared_size, 0);
  private_.assign(layout.private_size, 0);
  scratch_size_ = medium_scratch;
  scratch_base_ = layout.private_size - medium_scratch;
}

void NodeMemory::check(Region region, std::uint64_t offset, std::uint64_t len) const {
  const std::uint64_t limit = size(region);
  if (offset > limit || len > limit - offset) {
    fail(ErrorCode::OutOfBounds,
         std::string(region == Region::Shared ? "shared" : "private") + " access [" +
             std::to_string(offset) + ", +" + std::to_string(len) + ") in region of " +
             std::to_string(limit) + " bytes");
  }
}

std::uint64_t NodeMemory::size(Region region) const {
  return region == Region::Shared ? shared_.size() : private_.size();
}

std::vector<std::uint8_t> NodeMemory::dma_read(Region region, std::uint64_t offset,
                                               std::uint64_t len) const {
  check(region, offset, len);
  const auto& mem = region == Region::Shared ? shared_ : private_;
  return {mem.begin() + offset, mem.begin() + offset + len};
}

void NodeMemory::dma_read_into(Region region, std::uint64_t offset,
                               std::span<std::uint8_t> out) const {
  check(region, offset, out.size());
  const auto& mem = region == Region::Shared ? shared_ : private_;
  if (!out.empty()) std::memcpy(out.data(), mem.data() + offset, out.size());
}

void NodeMemory::dma_write(Region region, std::uint64_t offset,
                           std::span<const std::uint8_t> bytes) {
  check(region, offset, bytes.size());
  auto& mem = region == Region::Shared ? shared_ : private_;
  if (!bytes.empty()) std::memcpy(mem.data() + offset, bytes.data(), bytes.size());
}

std::uint64_t NodeMemory::scratch_alloc(std::uint64_t len) {
  if (len > scratch_size_) {
    fail(ErrorCode::VariantViolation,
         "medium payload of " + std::to_string(len) + " bytes exceeds the " +
             std::to_string(scratch_size_) + "-byte scratch ring");
  }
  if (scratch_next_ + len > scratch_size_) scratch_next_ = 0;  // wrap
  const std::uint64_t at = scratch_base_ + scratch_next_;
  scratch_next_ += len;
  return at;
}

std::span<std::uint8_t> NodeMemory::view(Region region) {
  auto& mem = region == Region::Shared ? shared_ : private_;
  return {mem.data(), mem.size()};
}

std::span<const std::uint8_t> NodeMemory::view(Region region) const {
  const auto& mem = region == Region::Shared ? shared_ : private_;
  return {mem.data(), mem.size()};
}

}  // namespace pgasim
