#pragma once

#include <stdexcept>
#include <string>

namespace pgasim {

enum class ErrorCode {
  // addressing / layout
  OutOfSegment,
  InvalidLayout,
  // wire codec
  TooManyArgs,
  PayloadMismatch,
  Truncated,
  BadVersion,
  MtuTooSmall,
  GapDetected,
  MixedSeq,
  // memory
  OutOfBounds,
  // core
  QueueFull,
  BadCommand,
  UnknownOpcode,
  ReplyToNonRequester,
  ReservedOpcode,
  AlreadyRegistered,
  NotInHandler,
  DuplicateReply,
  // transport
  Unreachable,
  LivelockGuard,
  // api
  InvalidConfig,
  VariantViolation,
  UnknownHandle,
  // compute
  BadDims,
  // io
  IoError,
};

const char* to_string(ErrorCode code);

/// Exception carrying a stable error code plus a human-readable detail string.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace pgasim
