#pragma once

#include <cstdint>

#include "pgasim/errors.hpp"

namespace pgasim {

/// 0-based rank of a node within the job.
using NodeId = std::uint16_t;

/// A location in the globally shared address space: (node, byte offset into
/// that node's shared segment).
struct GlobalAddress {
  NodeId node = 0;
  std::uint64_t offset = 0;

  bool operator==(const GlobalAddress&) const = default;
};

/// Per-node memory split. The shared segment size is uniform across nodes,
/// which keeps global address arithmetic trivial.
struct SegmentLayout {
  std::uint64_t shared_size = 0;
  std::uint64_t private_size = 0;

  bool operator==(const SegmentLayout&) const = default;
};

/// Maps a global address to an offset in the owning node's shared segment.
/// Throws OutOfSegment when the offset lies past the segment end.
std::uint64_t resolve(const GlobalAddress& ga, const SegmentLayout& layout);

/// Throws InvalidLayout on zero-sized regions or an empty job.
void validate_layout(const SegmentLayout& layout, std::uint32_t node_count);

}  // namespace pgasim
