#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include "pgasim/memory.hpp"
#include "pgasim/trace.hpp"
#include "pgasim/wire.hpp"

namespace pgasim {

// Built-in opcodes. 0x06..0x7f reserved, 0x80..0xff user handlers.
inline constexpr std::uint8_t kOpPut = 0x01;
inline constexpr std::uint8_t kOpGet = 0x02;
inline constexpr std::uint8_t kOpCompute = 0x03;
inline constexpr std::uint8_t kOpBarrierArrive = 0x04;
inline constexpr std::uint8_t kOpBarrierRelease = 0x05;
inline constexpr std::uint8_t kOpUserBase = 0x80;

enum class CommandKind : std::uint8_t { Put, Get, AmRequest, AmReply };

/// Queue rotation order for the scheduler: replies first in the rotation.
enum class TxQueue : std::uint8_t { Reply = 0, Host = 1, Compute = 2 };

/// Descriptor of a local memory range used as a message payload source or
/// as the landing spot of a received payload.
struct SourceDesc {
  Region region = Region::Shared;
  std::uint64_t offset = 0;
  std::uint64_t len = 0;
};

/// What a get needs besides the header: where to read remotely and where the
/// reply payload lands locally.
struct GetDesc {
  std::uint64_t remote_offset = 0;
  std::uint64_t len = 0;
  Region dest_region = Region::Shared;
  std::uint64_t dest_offset = 0;
};

struct Command {
  CommandKind kind = CommandKind::AmRequest;
  NodeId dst = 0;
  Variant variant = Variant::Short;
  std::uint8_t opcode = 0;
  std::uint8_t arg_count = 0;
  std::array<std::uint32_t, kMaxArgs> args{};
  std::optional<SourceDesc> payload;
  std::uint64_t dest_offset = 0;  // Long messages
  std::uint64_t token = 0;        // request: fresh; reply: the request's token
  std::optional<GetDesc> get;

  void set_args(std::initializer_list<std::uint32_t> values) {
    args.fill(0);
    arg_count = 0;
    for (std::uint32_t v : values) args[arg_count++] = v;
  }
};

struct CoreConfig {
  std::uint32_t queue_depth = 64;
};

/// Token layout: requester rank in the top 16 bits, 48-bit counter below.
inline NodeId token_requester(std::uint64_t token) {
  return static_cast<NodeId>(token >> 48);
}

/// Opaque completion id handed out per operation; numbered per node.
using Handle = std::uint64_t;

enum class HandleState { Pending, Done, Error };

class NodeCore;

/// Passed to user handlers; the only way to issue a reply, which therefore
/// can only target the requesting node.
class HandlerContext {
 public:
  NodeId self() const;
  NodeId requester() const { return request_.src; }
  std::uint64_t token() const { return request_.token; }
  std::span<const std::uint32_t> args() const {
    return {request_.args.data(), request_.arg_count};
  }
  /// Where the payload landed (shared for Long, scratch for Medium).
  const std::optional<SourceDesc>& payload() const { return payload_at_; }
  NodeMemory& memory();

  void reply_short(std::uint8_t opcode, std::initializer_list<std::uint32_t> args);
  void reply_medium(std::uint8_t opcode, std::initializer_list<std::uint32_t> args,
                    const SourceDesc& payload);
  void reply_long(std::uint8_t opcode, std::initializer_list<std::uint32_t> args,
                  const SourceDesc& payload, std::uint64_t dest_offset);

  /// Variant-agnostic reply path; kind, dst and token are filled in here.
  void reply_command(Command cmd);

 private:
  friend class NodeCore;
  HandlerContext(NodeCore& core, const MessageHeader& request,
                 std::optional<SourceDesc> payload_at)
      : core_(core), request_(request), payload_at_(payload_at) {}

  NodeCore& core_;
  const MessageHeader& request_;
  std::optional<SourceDesc> payload_at_;
  bool replied_ = false;
};

using Handler = std::function<void(HandlerContext&)>;

/// Callbacks through which message dispatch reaches the rest of the node.
/// Supplied by the driving runtime so the core stays transport-agnostic.
struct DispatchHooks {
  std::function<void(std::span<const std::uint32_t>, std::optional<SourceDesc>)>
      compute_submit;
  std::function<void(std::uint64_t token)> get_completed;
  std::function<void(NodeId src, std::uint64_t token)> barrier_arrive;
  std::function<void()> barrier_release;
  std::function<void(ErrorCode, const std::string&)> protocol_error;
  /// Scope of the currently running user handler (nullptr outside); lets the
  /// runtime route am_reply_* calls and reject them outside handlers.
  std::function<void(HandlerContext*)> set_active_handler;
};

/// Per-node AM sequencer/receiver state: the three bounded command queues,
/// the round-robin scheduler, header formation with DMA payload fetch, and
/// receive-side opcode dispatch. One handler executes at a time by
/// construction: deliver() runs on the node's single execution context.
class NodeCore {
 public:
  NodeCore(NodeId self, std::uint32_t node_count, NodeMemory* memory,
           CoreConfig config = {});

  NodeId self() const { return self_; }
  NodeMemory& memory() { return *memory_; }

  /// Validates and enqueues. Throws QueueFull, BadCommand,
  /// ReplyToNonRequester, VariantViolation, OutOfBounds.
  void submit(TxQueue queue, const Command& cmd);

  std::size_t queue_depth(TxQueue queue) const;
  bool queues_empty() const;

  /// Round-robin grant over {reply, host, compute}; starvation-free.
  std::optional<Command> schedule_next();

  struct SequencedMessage {
    MessageHeader header;
    Bytes payload;
    std::uint64_t seq = 0;
  };

  /// Forms the active message for a granted command: builds the header,
  /// fetches payload via DMA, assigns a fresh seq.
  SequencedMessage sequence(const Command& cmd);

  std::uint64_t make_token() {
    return (static_cast<std::uint64_t>(self_) << 48) | ++token_counter_;
  }

  void register_handler(std::uint8_t opcode, Handler handler);
  bool has_handler(std::uint8_t opcode) const;

  void add_pending_get(std::uint64_t token, const GetDesc& desc);
  std::size_t pending_get_count() const { return pending_gets_.size(); }

  /// Receive-side dispatch of one reassembled message. `now` and `trace` are
  /// used for handler begin/end records only.
  void deliver(const MessageHeader& header, ByteView payload, DispatchHooks& hooks,
               Trace* trace, std::uint64_t now);

 private:
  void validate(const Command& cmd) const;

  NodeId self_;
  std::uint32_t node_count_;
  NodeMemory* memory_;
  CoreConfig config_;
  std::array<std::deque<Command>, 3> queues_;
  int rr_next_ = 0;
  std::uint64_t seq_counter_ = 0;
  std::uint64_t token_counter_ = 0;
  std::unordered_map<std::uint8_t, Handler> handlers_;
  std::unordered_map<std::uint64_t, GetDesc> pending_gets_;
};

}  // namespace pgasim
