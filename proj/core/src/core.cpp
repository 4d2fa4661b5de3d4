#include "pgasim/core.hpp"

#include <utility>

namespace pgasim {

namespace {

std::uint64_t args_u64(const MessageHeader& h, int lo) {
  return static_cast<std::uint64_t>(h.args[lo]) |
         (static_cast<std::uint64_t>(h.args[lo + 1]) << 32);
}

}  // namespace

NodeId HandlerContext::self() const { return core_.self(); }

NodeMemory& HandlerContext::memory() { return core_.memory(); }

void HandlerContext::reply_command(Command cmd) {
  if (replied_) {
    fail(ErrorCode::DuplicateReply,
         "handler already replied to token " + std::to_string(request_.token));
  }
  if (request_.kind != MessageKind::Request) {
    fail(ErrorCode::BadCommand, "cannot reply to a reply message");
  }
  cmd.kind = CommandKind::AmReply;
  cmd.dst = request_.src;
  cmd.token = request_.token;
  core_.submit(TxQueue::Reply, cmd);
  replied_ = true;
}

void HandlerContext::reply_short(std::uint8_t opcode,
                                 std::initializer_list<std::uint32_t> args) {
  Command cmd;
  cmd.variant = Variant::Short;
  cmd.opcode = opcode;
  cmd.set_args(args);
  reply_command(std::move(cmd));
}

void HandlerContext::reply_medium(std::uint8_t opcode,
                                  std::initializer_list<std::uint32_t> args,
                                  const SourceDesc& payload) {
  Command cmd;
  cmd.variant = Variant::Medium;
  cmd.opcode = opcode;
  cmd.set_args(args);
  cmd.payload = payload;
  reply_command(std::move(cmd));
}

void HandlerContext::reply_long(std::uint8_t opcode,
                                std::initializer_list<std::uint32_t> args,
                                const SourceDesc& payload, std::uint64_t dest_offset) {
  Command cmd;
  cmd.variant = Variant::Long;
  cmd.opcode = opcode;
  cmd.set_args(args);
  cmd.payload = payload;
  cmd.dest_offset = dest_offset;
  reply_command(std::move(cmd));
}

NodeCore::NodeCore(NodeId self, std::uint32_t node_count, NodeMemory* memory,
                   CoreConfig config)
    : self_(self), node_count_(node_count), memory_(memory), config_(config) {}

void NodeCore::validate(const Command& cmd) const {
  if (cmd.dst >= node_count_) {
    fail(ErrorCode::BadCommand, "destination rank " + std::to_string(cmd.dst) +
                                    " out of a " + std::to_string(node_count_) +
                                    "-node job");
  }
  if (cmd.arg_count > kMaxArgs) fail(ErrorCode::TooManyArgs, "command args");
  switch (cmd.kind) {
    case CommandKind::Put:
      if (!cmd.payload) fail(ErrorCode::BadCommand, "put without source range");
      break;
    case CommandKind::Get:
      if (cmd.payload) fail(ErrorCode::BadCommand, "get carries no payload");
      if (!cmd.get) fail(ErrorCode::BadCommand, "get without descriptor");
      break;
    case CommandKind::AmRequest:
      break;
    case CommandKind::AmReply:
      if (cmd.token == 0) {
        fail(ErrorCode::BadCommand, "reply without a live request token");
      }
      if (token_requester(cmd.token) != cmd.dst) {
        fail(ErrorCode::ReplyToNonRequester,
             "reply addressed to rank " + std::to_string(cmd.dst) +
                 " but the request came from rank " +
                 std::to_string(token_requester(cmd.token)));
      }
      break;
  }
  if (cmd.variant == Variant::Short && cmd.payload) {
    fail(ErrorCode::VariantViolation, "short message cannot carry a payload");
  }
  if (cmd.payload) {
    const SourceDesc& src = *cmd.payload;
    const std::uint64_t limit = memory_->size(src.region);
    if (src.offset > limit || src.len > limit - src.offset) {
      fail(ErrorCode::OutOfBounds, "payload source range out of bounds");
    }
  }
  // Shared segments are uniform across nodes, so remote shared-segment
  // bounds are checkable at the initiator.
  const std::uint64_t shared = memory_->shared_size();
  auto check_remote = [&](std::uint64_t offset, std::uint64_t len) {
    if (offset > shared || len > shared - offset) {
      fail(ErrorCode::OutOfSegment, "remote range [" + std::to_string(offset) +
                                        ", +" + std::to_string(len) +
                                        ") exceeds the shared segment");
    }
  };
  if (cmd.variant == Variant::Long &&
      (cmd.kind == CommandKind::Put || cmd.kind == CommandKind::AmRequest)) {
    check_remote(cmd.dest_offset, cmd.payload ? cmd.payload->len : 0);
  }
  if (cmd.kind == CommandKind::Get) {
    check_remote(cmd.get->remote_offset, cmd.get->len);
    const std::uint64_t limit = memory_->size(cmd.get->dest_region);
    if (cmd.get->dest_offset > limit || cmd.get->len > limit - cmd.get->dest_offset) {
      fail(ErrorCode::OutOfBounds, "get destination range out of bounds");
    }
  }
}

void NodeCore::submit(TxQueue queue, const Command& cmd) {
  validate(cmd);
  auto& q = queues_[static_cast<int>(queue)];
  if (q.size() >= config_.queue_depth) {
    fail(ErrorCode::QueueFull, "queue " + std::to_string(static_cast<int>(queue)) +
                                   " at depth " + std::to_string(config_.queue_depth));
  }
  q.push_back(cmd);
}

std::size_t NodeCore::queue_depth(TxQueue queue) const {
  return queues_[static_cast<int>(queue)].size();
}

bool NodeCore::queues_empty() const {
  return queues_[0].empty() && queues_[1].empty() && queues_[2].empty();
}

std::optional<Command> NodeCore::schedule_next() {
  for (int i = 0; i < 3; ++i) {
    const int qi = (rr_next_ + i) % 3;
    if (!queues_[qi].empty()) {
      Command cmd = std::move(queues_[qi].front());
      queues_[qi].pop_front();
      rr_next_ = (qi + 1) % 3;
      return cmd;
    }
  }
  return std::nullopt;
}

NodeCore::SequencedMessage NodeCore::sequence(const Command& cmd) {
  SequencedMessage out;
  MessageHeader& h = out.header;
  h.src = self_;
  h.dst = cmd.dst;
  h.token = cmd.token;
  h.flags = 0;

  switch (cmd.kind) {
    case CommandKind::Put:
      h.kind = MessageKind::Request;
      h.variant = Variant::Long;
      h.opcode = kOpPut;
      h.dest_offset = cmd.dest_offset;
      break;
    case CommandKind::Get: {
      h.kind = MessageKind::Request;
      h.variant = Variant::Short;
      h.opcode = kOpGet;
      const GetDesc& g = *cmd.get;
      h.arg_count = 3;
      h.args[0] = static_cast<std::uint32_t>(g.remote_offset);
      h.args[1] = static_cast<std::uint32_t>(g.remote_offset >> 32);
      h.args[2] = static_cast<std::uint32_t>(g.len);
      break;
    }
    case CommandKind::AmRequest:
    case CommandKind::AmReply:
      h.kind = cmd.kind == CommandKind::AmReply ? MessageKind::Reply
                                                : MessageKind::Request;
      h.variant = cmd.variant;
      h.opcode = cmd.opcode;
      h.arg_count = cmd.arg_count;
      h.args = cmd.args;
      if (cmd.variant == Variant::Long) h.dest_offset = cmd.dest_offset;
      break;
  }

  if (cmd.payload) {
    out.payload = memory_->dma_read(cmd.payload->region, cmd.payload->offset,
                                    cmd.payload->len);
    h.payload_len = static_cast<std::uint32_t>(out.payload.size());
  }
  out.seq = (static_cast<std::uint64_t>(self_) << 48) | ++seq_counter_;
  return out;
}

void NodeCore::register_handler(std::uint8_t opcode, Handler handler) {
  if (opcode < kOpUserBase) {
    fail(ErrorCode::ReservedOpcode,
         "opcode " + std::to_string(opcode) + " below the user range");
  }
  if (handlers_.count(opcode)) {
    fail(ErrorCode::AlreadyRegistered, "opcode " + std::to_string(opcode));
  }
  handlers_.emplace(opcode, std::move(handler));
}

bool NodeCore::has_handler(std::uint8_t opcode) const {
  return handlers_.count(opcode) != 0;
}

void NodeCore::add_pending_get(std::uint64_t token, const GetDesc& desc) {
  pending_gets_.emplace(token, desc);
}

void NodeCore::deliver(const MessageHeader& h, ByteView payload, DispatchHooks& hooks,
                       Trace* trace, std::uint64_t now) {
  auto begin_end = [&](auto&& body) {
    if (trace) {
      trace->emit({now, TraceKind::HandlerBegin, self_, h.src, h.opcode, 0,
                   h.kind == MessageKind::Reply, 0, h.token, payload.size()});
    }
    body();
    if (trace) {
      trace->emit({now, TraceKind::HandlerEnd, self_, h.src, h.opcode, 0,
                   h.kind == MessageKind::Reply, 0, h.token, payload.size()});
    }
  };

  switch (h.opcode) {
    case kOpPut:
      begin_end([&] {
        if (h.kind == MessageKind::Reply) {
          auto it = pending_gets_.find(h.token);
          if (it == pending_gets_.end()) {
            hooks.protocol_error(ErrorCode::BadCommand,
                                 "put reply with no pending get");
            return;
          }
          const GetDesc desc = it->second;
          pending_gets_.erase(it);
          memory_->dma_write(desc.dest_region, desc.dest_offset, payload);
          if (hooks.get_completed) hooks.get_completed(h.token);
        } else {
          memory_->dma_write(Region::Shared, h.dest_offset, payload);
        }
      });
      return;

    case kOpGet:
      begin_end([&] {
        // "immediately issues a PUT reply command" toward the requester.
        Command reply;
        reply.kind = CommandKind::AmReply;
        reply.dst = h.src;
        reply.variant = Variant::Long;
        reply.opcode = kOpPut;
        reply.payload = SourceDesc{Region::Shared, args_u64(h, 0), h.args[2]};
        reply.dest_offset = 0;  // requester resolves via its pending-get slot
        reply.token = h.token;
        submit(TxQueue::Reply, reply);
      });
      return;

    case kOpCompute:
      begin_end([&] {
        // Payload, when present, reaches memory before the compute engine
        // hears about the command.
        std::optional<SourceDesc> at;
        if (h.variant == Variant::Long) {
          memory_->dma_write(Region::Shared, h.dest_offset, payload);
          at = SourceDesc{Region::Shared, h.dest_offset, payload.size()};
        } else if (h.variant == Variant::Medium) {
          const std::uint64_t off = memory_->scratch_alloc(payload.size());
          memory_->dma_write(Region::Private, off, payload);
          at = SourceDesc{Region::Private, off, payload.size()};
        }
        if (hooks.compute_submit) {
          hooks.compute_submit({h.args.data(), h.arg_count}, at);
        }
      });
      return;

    case kOpBarrierArrive:
      begin_end([&] {
        if (hooks.barrier_arrive) hooks.barrier_arrive(h.src, h.token);
      });
      return;

    case kOpBarrierRelease:
      begin_end([&] {
        if (hooks.barrier_release) hooks.barrier_release();
      });
      return;

    default: {
      auto it = handlers_.find(h.opcode);
      if (it == handlers_.end()) {
        hooks.protocol_error(ErrorCode::UnknownOpcode,
                             "opcode " + std::to_string(h.opcode));
        return;
      }
      begin_end([&] {
        std::optional<SourceDesc> at;
        if (h.variant == Variant::Long) {
          memory_->dma_write(Region::Shared, h.dest_offset, payload);
          at = SourceDesc{Region::Shared, h.dest_offset, payload.size()};
        } else if (h.variant == Variant::Medium) {
          const std::uint64_t off = memory_->scratch_alloc(payload.size());
          memory_->dma_write(Region::Private, off, payload);
          at = SourceDesc{Region::Private, off, payload.size()};
        }
        HandlerContext ctx(*this, h, at);
        if (hooks.set_active_handler) hooks.set_active_handler(&ctx);
        it->second(ctx);
        if (hooks.set_active_handler) hooks.set_active_handler(nullptr);
      });
      return;
    }
  }
}

}  // namespace pgasim
