#include "pgasim/addressing.hpp"

#include <string>

namespace pgasim {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfSegment: return "OutOfSegment";
    case ErrorCode::InvalidLayout: return "InvalidLayout";
    case ErrorCode::TooManyArgs: return "TooManyArgs";
    case ErrorCode::PayloadMismatch: return "PayloadMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::MtuTooSmall: return "MtuTooSmall";
    case ErrorCode::GapDetected: return "GapDetected";
    case ErrorCode::MixedSeq: return "MixedSeq";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::QueueFull: return "QueueFull";
    case ErrorCode::BadCommand: return "BadCommand";
    case ErrorCode::UnknownOpcode: return "UnknownOpcode";
    case ErrorCode::ReplyToNonRequester: return "ReplyToNonRequester";
    case ErrorCode::ReservedOpcode: return "ReservedOpcode";
    case ErrorCode::AlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::NotInHandler: return "NotInHandler";
    case ErrorCode::DuplicateReply: return "DuplicateReply";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::LivelockGuard: return "LivelockGuard";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::VariantViolation: return "VariantViolation";
    case ErrorCode::UnknownHandle: return "UnknownHandle";
    case ErrorCode::BadDims: return "BadDims";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

std::uint64_t resolve(const GlobalAddress& ga, const SegmentLayout& layout) {
  if (ga.offset >= layout.shared_size) {
    fail(ErrorCode::OutOfSegment,
         "offset " + std::to_string(ga.offset) + " >= shared segment size " +
             std::to_string(layout.shared_size));
  }
  return ga.offset;
}

void validate_layout(const SegmentLayout& layout, std::uint32_t node_count) {
  if (layout.shared_size == 0 || layout.private_size == 0) {
    fail(ErrorCode::InvalidLayout, "segment sizes must be nonzero");
  }
  if (node_count == 0) {
    fail(ErrorCode::InvalidLayout, "job needs at least one node");
  }
}

}  // namespace pgasim
