#include "pgasim/api.hpp"

#include <utility>

namespace pgasim {

namespace {

void copy_args(Command& cmd, std::span<const std::uint32_t> args) {
  if (args.size() > kMaxArgs) fail(ErrorCode::TooManyArgs, "AM argument list");
  cmd.args.fill(0);
  cmd.arg_count = static_cast<std::uint8_t>(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) cmd.args[i] = args[i];
}

}  // namespace

Runtime Runtime::init(const JobConfig& config) {
  if (config.node_count == 0) {
    fail(ErrorCode::InvalidConfig, "node_count must be at least 1");
  }
  if (config.topology != "ring") {
    fail(ErrorCode::InvalidConfig, "unknown topology '" + config.topology + "'");
  }
  if (config.packet_size < kHeaderBytes) {
    fail(ErrorCode::InvalidConfig, "packet size below the 96-byte header");
  }
  try {
    config.link.validate();
  } catch (const Error&) {
    fail(ErrorCode::InvalidConfig, "bad link parameters");
  }
  if (config.dla.macs_per_cycle() == 0 || config.dla.clock_hz <= 0) {
    fail(ErrorCode::InvalidConfig, "bad DLA parameters");
  }
  if (config.event_cap == 0) fail(ErrorCode::InvalidConfig, "event cap must be positive");
  return Runtime(config);
}

void Runtime::attach() { attach(config_.segment); }

void Runtime::attach(const SegmentLayout& segment) {
  if (fabric_) fail(ErrorCode::InvalidConfig, "attach called twice");
  try {
    validate_layout(segment, config_.node_count);
  } catch (const Error&) {
    fail(ErrorCode::InvalidConfig, "bad segment layout");
  }
  config_.segment = segment;

  FabricConfig fc;
  fc.topology = Topology::ring(config_.node_count);
  fc.link = config_.link;
  fc.segment = segment;
  fc.medium_scratch = config_.medium_scratch;
  fc.dla = config_.dla;
  fc.core = config_.core;
  fc.mtu_payload = config_.packet_size;
  fc.event_cap = config_.event_cap;
  fc.trace = config_.trace;
  fabric_ = std::make_unique<Fabric>(std::move(fc));
}

void Runtime::ensure_attached() const {
  if (!fabric_) fail(ErrorCode::InvalidConfig, "runtime is not attached");
}

std::uint64_t Runtime::now() const {
  ensure_attached();
  return fabric_->now();
}

double Runtime::cycles_to_us(std::uint64_t cycles) const {
  return config_.link.cycles_to_us(cycles);
}

Handle Runtime::put(NodeId node, const GlobalAddress& dest, const SourceDesc& src) {
  ensure_attached();
  if (dest.offset > config_.segment.shared_size ||
      src.len > config_.segment.shared_size - dest.offset) {
    fail(ErrorCode::OutOfSegment, "put destination exceeds the shared segment");
  }
  Command cmd;
  cmd.kind = CommandKind::Put;
  cmd.dst = dest.node;
  cmd.variant = Variant::Long;
  cmd.dest_offset = dest.offset;
  cmd.payload = src;
  return fabric_->submit_command(node, cmd);
}

Handle Runtime::get(NodeId node, const GlobalAddress& src, std::uint64_t len,
                    Region dest_region, std::uint64_t dest_offset) {
  ensure_attached();
  if (src.offset > config_.segment.shared_size ||
      len > config_.segment.shared_size - src.offset) {
    fail(ErrorCode::OutOfSegment, "get source exceeds the shared segment");
  }
  Command cmd;
  cmd.kind = CommandKind::Get;
  cmd.dst = src.node;
  cmd.get = GetDesc{src.offset, len, dest_region, dest_offset};
  return fabric_->submit_command(node, cmd);
}

Handle Runtime::am_request_short(NodeId node, NodeId dst, std::uint8_t opcode,
                                 std::span<const std::uint32_t> args) {
  ensure_attached();
  Command cmd;
  cmd.kind = CommandKind::AmRequest;
  cmd.dst = dst;
  cmd.variant = Variant::Short;
  cmd.opcode = opcode;
  copy_args(cmd, args);
  return fabric_->submit_command(node, cmd);
}

Handle Runtime::am_request_medium(NodeId node, NodeId dst, std::uint8_t opcode,
                                  std::span<const std::uint32_t> args,
                                  const SourceDesc& payload) {
  ensure_attached();
  if (payload.len > fabric_->memory(dst).scratch_size()) {
    fail(ErrorCode::VariantViolation, "medium payload exceeds the scratch ring");
  }
  Command cmd;
  cmd.kind = CommandKind::AmRequest;
  cmd.dst = dst;
  cmd.variant = Variant::Medium;
  cmd.opcode = opcode;
  cmd.payload = payload;
  copy_args(cmd, args);
  return fabric_->submit_command(node, cmd);
}

Handle Runtime::am_request_long(NodeId node, NodeId dst, std::uint8_t opcode,
                                std::span<const std::uint32_t> args,
                                const SourceDesc& payload, std::uint64_t dest_offset) {
  ensure_attached();
  Command cmd;
  cmd.kind = CommandKind::AmRequest;
  cmd.dst = dst;
  cmd.variant = Variant::Long;
  cmd.opcode = opcode;
  cmd.payload = payload;
  cmd.dest_offset = dest_offset;
  copy_args(cmd, args);
  return fabric_->submit_command(node, cmd);
}

HandlerContext& Runtime::reply_context(std::uint64_t token) {
  ensure_attached();
  HandlerContext* ctx = fabric_->active_handler();
  if (!ctx || ctx->token() != token) {
    fail(ErrorCode::NotInHandler,
         "reply for token " + std::to_string(token) + " outside its handler");
  }
  return *ctx;
}

void Runtime::am_reply_short(std::uint64_t token, std::uint8_t opcode,
                             std::span<const std::uint32_t> args) {
  HandlerContext& ctx = reply_context(token);
  Command cmd;
  cmd.variant = Variant::Short;
  cmd.opcode = opcode;
  copy_args(cmd, args);
  ctx.reply_command(cmd);
}

void Runtime::am_reply_medium(std::uint64_t token, std::uint8_t opcode,
                              std::span<const std::uint32_t> args,
                              const SourceDesc& payload) {
  HandlerContext& ctx = reply_context(token);
  Command cmd;
  cmd.variant = Variant::Medium;
  cmd.opcode = opcode;
  cmd.payload = payload;
  copy_args(cmd, args);
  ctx.reply_command(cmd);
}

void Runtime::am_reply_long(std::uint64_t token, std::uint8_t opcode,
                            std::span<const std::uint32_t> args,
                            const SourceDesc& payload, std::uint64_t dest_offset) {
  HandlerContext& ctx = reply_context(token);
  Command cmd;
  cmd.variant = Variant::Long;
  cmd.opcode = opcode;
  cmd.payload = payload;
  cmd.dest_offset = dest_offset;
  copy_args(cmd, args);
  ctx.reply_command(cmd);
}

void Runtime::barrier() {
  ensure_attached();
  fabric_->barrier();
}

void Runtime::wait(Handle handle) {
  ensure_attached();
  fabric_->wait(handle);
}

HandleState Runtime::poll(Handle handle) const {
  ensure_attached();
  return fabric_->poll(handle);
}

Handle Runtime::enqueue_compute(NodeId node, ComputeCommand cmd) {
  ensure_attached();
  return fabric_->enqueue_compute(node, std::move(cmd));
}

void Runtime::register_handler(NodeId node, std::uint8_t opcode, Handler handler) {
  ensure_attached();
  fabric_->register_handler(node, opcode, std::move(handler));
}

std::uint64_t Runtime::run_until_idle() {
  ensure_attached();
  return fabric_->run_until_idle();
}

NodeMemory& Runtime::memory(NodeId node) {
  ensure_attached();
  return fabric_->memory(node);
}

Fabric& Runtime::fabric() {
  ensure_attached();
  return *fabric_;
}

}  // namespace pgasim
