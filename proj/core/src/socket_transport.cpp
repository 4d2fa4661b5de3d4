#include "pgasim/socket_transport.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <utility>

namespace pgasim {

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::write(fd, data, len);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::IoError, std::string("socket write: ") + std::strerror(errno));
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::read(fd, data, len);
    if (n == 0) return false;  // peer closed
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Mailbox
// ---------------------------------------------------------------------------

void SocketNode::Mailbox::push(Incoming item) {
  std::unique_lock lock(mu_);
  can_push_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
  if (closed_) return;
  items_.push_back(std::move(item));
  can_pop_.notify_one();
}

bool SocketNode::Mailbox::pop(Incoming& out, std::uint32_t timeout_ms) {
  std::unique_lock lock(mu_);
  if (!can_pop_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                         [&] { return !items_.empty() || closed_; })) {
    return false;
  }
  if (items_.empty()) return false;
  out = std::move(items_.front());
  items_.pop_front();
  can_push_.notify_one();
  return true;
}

void SocketNode::Mailbox::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  can_push_.notify_all();
  can_pop_.notify_all();
}

// ---------------------------------------------------------------------------
// SocketNode
// ---------------------------------------------------------------------------

SocketNode::SocketNode(SocketRuntime& rt, NodeId self, std::uint32_t node_count,
                       const SocketConfig& cfg)
    : rt_(rt),
      self_(self),
      node_count_(node_count),
      cfg_(cfg),
      memory_(std::make_unique<NodeMemory>(cfg.segment, cfg.medium_scratch)),
      core_(std::make_unique<NodeCore>(self, node_count, memory_.get(), cfg.core)),
      mailbox_(cfg.mailbox_capacity),
      partial_(node_count) {
  hooks_.compute_submit = [this](std::span<const std::uint32_t> args,
                                 std::optional<SourceDesc>) {
    enqueue_compute(decode_compute_args(args));
  };
  hooks_.get_completed = [this](std::uint64_t token) {
    auto it = token_handles_.find(token);
    if (it != token_handles_.end()) handles_[it->second].state = HandleState::Done;
  };
  hooks_.barrier_arrive = [this](NodeId, std::uint64_t) { ++barrier_arrived_; };
  hooks_.barrier_release = [this]() { ++barrier_released_gen_; };
  hooks_.protocol_error = [](ErrorCode code, const std::string& msg) {
    throw Error(code, "socket dispatch: " + msg);
  };
  hooks_.set_active_handler = [this](HandlerContext* ctx) { active_handler_ = ctx; };
}

std::uint32_t SocketNode::node_count() const { return node_count_; }

void SocketNode::register_handler(std::uint8_t opcode, Handler handler) {
  core_->register_handler(opcode, std::move(handler));
}

Handle SocketNode::new_handle(bool done) {
  const Handle h = (static_cast<std::uint64_t>(self_) << 48) | ++next_handle_;
  handles_[h] = {done ? HandleState::Done : HandleState::Pending, 0};
  return h;
}

Handle SocketNode::submit(Command cmd) {
  const bool is_request = cmd.kind != CommandKind::AmReply;
  if (is_request && cmd.token == 0) cmd.token = core_->make_token();
  core_->submit(TxQueue::Host, cmd);
  const Handle h = new_handle(false);
  handles_[h].token = cmd.token;
  if (cmd.kind == CommandKind::Get) {
    core_->add_pending_get(cmd.token, *cmd.get);
    token_handles_[cmd.token] = h;
    pump_tx();
  } else {
    // One-sided sends complete at injection, which pump_tx performs inline.
    pump_tx();
    handles_[h].state = HandleState::Done;
  }
  return h;
}

Handle SocketNode::put(const GlobalAddress& dest, const SourceDesc& src) {
  Command cmd;
  cmd.kind = CommandKind::Put;
  cmd.dst = dest.node;
  cmd.variant = Variant::Long;
  cmd.dest_offset = dest.offset;
  cmd.payload = src;
  return submit(cmd);
}

Handle SocketNode::get(const GlobalAddress& src, std::uint64_t len, Region dest_region,
                       std::uint64_t dest_offset) {
  Command cmd;
  cmd.kind = CommandKind::Get;
  cmd.dst = src.node;
  cmd.get = GetDesc{src.offset, len, dest_region, dest_offset};
  return submit(cmd);
}

Handle SocketNode::am_request_short(NodeId dst, std::uint8_t opcode,
                                    std::span<const std::uint32_t> args) {
  Command cmd;
  cmd.kind = CommandKind::AmRequest;
  cmd.dst = dst;
  cmd.variant = Variant::Short;
  cmd.opcode = opcode;
  if (args.size() > kMaxArgs) fail(ErrorCode::TooManyArgs, "AM argument list");
  cmd.arg_count = static_cast<std::uint8_t>(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) cmd.args[i] = args[i];
  return submit(cmd);
}

Handle SocketNode::am_request_medium(NodeId dst, std::uint8_t opcode,
                                     std::span<const std::uint32_t> args,
                                     const SourceDesc& payload) {
  Command cmd;
  cmd.kind = CommandKind::AmRequest;
  cmd.dst = dst;
  cmd.variant = Variant::Medium;
  cmd.opcode = opcode;
  cmd.payload = payload;
  if (args.size() > kMaxArgs) fail(ErrorCode::TooManyArgs, "AM argument list");
  cmd.arg_count = static_cast<std::uint8_t>(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) cmd.args[i] = args[i];
  return submit(cmd);
}

Handle SocketNode::am_request_long(NodeId dst, std::uint8_t opcode,
                                   std::span<const std::uint32_t> args,
                                   const SourceDesc& payload,
                                   std::uint64_t dest_offset) {
  Command cmd;
  cmd.kind = CommandKind::AmRequest;
  cmd.dst = dst;
  cmd.variant = Variant::Long;
  cmd.opcode = opcode;
  cmd.payload = payload;
  cmd.dest_offset = dest_offset;
  if (args.size() > kMaxArgs) fail(ErrorCode::TooManyArgs, "AM argument list");
  cmd.arg_count = static_cast<std::uint8_t>(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) cmd.args[i] = args[i];
  return submit(cmd);
}

Handle SocketNode::enqueue_compute(ComputeCommand cmd) {
  validate_command(cmd, *memory_);
  run_functional(*memory_, cmd);
  if (cmd.art) {
    const ArtConfig& art = *cmd.art;
    const SourceDesc results = result_range(cmd);
    const auto chunks = art_chunks(result_count(cmd), art.every_n_results, 1);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const ArtChunk& ch = chunks[i];
      const std::uint64_t esz = art.element_size;
      Command c;
      c.dst = art.dest_node;
      c.variant = Variant::Long;
      c.payload = SourceDesc{Region::Shared, results.offset + ch.first_elem * esz,
                             ch.elem_count * esz};
      c.token = core_->make_token();
      if (art.opcode == kOpPut) {
        c.kind = CommandKind::Put;
        c.dest_offset = art.dest_offset + ch.first_elem * esz;
      } else {
        c.kind = CommandKind::AmRequest;
        c.opcode = art.opcode;
        c.dest_offset = art.staging_offset +
                        (i % art.staging_slots) * (art.every_n_results * esz);
        const std::uint64_t target = art.dest_offset + ch.first_elem * esz;
        c.set_args({static_cast<std::uint32_t>(target),
                    static_cast<std::uint32_t>(target >> 32),
                    static_cast<std::uint32_t>(ch.elem_count)});
      }
      core_->submit(TxQueue::Compute, c);
      pump_tx();
    }
  }
  if (cmd.ack_offset) {
    const std::uint32_t flag = 1;
    memory_->dma_write(Region::Private, *cmd.ack_offset,
                       {reinterpret_cast<const std::uint8_t*>(&flag), sizeof(flag)});
  }
  return new_handle(true);
}

void SocketNode::pump_tx() {
  while (auto cmd = core_->schedule_next()) {
    NodeCore::SequencedMessage sm = core_->sequence(*cmd);
    const Bytes encoded = encode_message(sm.header, sm.payload);
    if (cmd->dst == self_) {
      deliver_bytes(encoded);
    } else {
      send_message(cmd->dst, sm.header, encoded, sm.seq);
    }
  }
}

void SocketNode::send_message(NodeId dst, const MessageHeader&, const Bytes& encoded,
                              std::uint64_t seq) {
  const int fd = rt_.tx_fd(self_, dst);
  const auto packets = packetize(encoded, cfg_.packet_size, seq);
  for (const Packet& p : packets) {
    const Bytes frame = encode_packet(p);
    const std::uint32_t len = static_cast<std::uint32_t>(frame.size());
    std::uint8_t hdr[4] = {static_cast<std::uint8_t>(len),
                           static_cast<std::uint8_t>(len >> 8),
                           static_cast<std::uint8_t>(len >> 16),
                           static_cast<std::uint8_t>(len >> 24)};
    write_all(fd, hdr, sizeof(hdr));
    write_all(fd, frame.data(), frame.size());
  }
}

void SocketNode::deliver_bytes(const Bytes& message) {
  auto [header, payload] = decode_message(message);
  core_->deliver(header, payload, hooks_, nullptr, 0);
  pump_tx();
}

void SocketNode::process_incoming(const Incoming& in) {
  Partial& part = partial_[in.from];
  if (!part.packets.empty() && part.packets.front().seq != in.packet.seq) {
    fail(ErrorCode::MixedSeq, "interleaved message fragments on one link");
  }
  part.packets.push_back(in.packet);
  if (part.packets.size() < part.packets.front().count) return;
  std::vector<Packet> packets;
  packets.swap(part.packets);
  deliver_bytes(reassemble(packets));
}

bool SocketNode::drain_one(std::uint32_t timeout_ms) {
  Incoming in;
  if (!mailbox_.pop(in, timeout_ms)) return false;
  process_incoming(in);
  return true;
}

void SocketNode::wait(Handle handle) {
  auto it = handles_.find(handle);
  if (it == handles_.end()) fail(ErrorCode::UnknownHandle, std::to_string(handle));
  while (it->second.state == HandleState::Pending) {
    if (!drain_one(cfg_.wait_timeout_ms)) {
      fail(ErrorCode::LivelockGuard, "timed out waiting on a socket handle");
    }
  }
}

HandleState SocketNode::poll(Handle handle) const {
  auto it = handles_.find(handle);
  if (it == handles_.end()) fail(ErrorCode::UnknownHandle, std::to_string(handle));
  return it->second.state;
}

void SocketNode::barrier() {
  pump_tx();
  const std::uint64_t gen = ++barrier_generation_;
  if (node_count_ == 1) {
    ++barrier_released_gen_;
    return;
  }
  am_request_short(0, kOpBarrierArrive, std::span<const std::uint32_t>{});
  while (barrier_released_gen_ < gen) {
    if (self_ == 0 && barrier_arrived_ >= node_count_) {
      barrier_arrived_ -= node_count_;
      for (std::uint32_t i = 0; i < node_count_; ++i) {
        Command release;
        release.kind = CommandKind::AmRequest;
        release.dst = static_cast<NodeId>(i);
        release.variant = Variant::Short;
        release.opcode = kOpBarrierRelease;
        release.token = core_->make_token();
        core_->submit(TxQueue::Host, release);
      }
      pump_tx();
      continue;
    }
    if (barrier_released_gen_ >= gen) break;
    if (!drain_one(cfg_.wait_timeout_ms)) {
      fail(ErrorCode::LivelockGuard, "barrier timed out on the socket transport");
    }
  }
}

// ---------------------------------------------------------------------------
// SocketRuntime
// ---------------------------------------------------------------------------

SocketRuntime::SocketRuntime(SocketConfig config) : config_(std::move(config)) {
  validate_layout(config_.segment, config_.node_count);
  if (config_.packet_size < kHeaderBytes) {
    fail(ErrorCode::MtuTooSmall, "packet size below the message header");
  }
  const std::uint32_t n = config_.node_count;
  nodes_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    nodes_.push_back(std::unique_ptr<SocketNode>(
        new SocketNode(*this, static_cast<NodeId>(i), n, config_)));
  }
  fds_.assign(static_cast<std::size_t>(n) * n, -1);
  rx_fds_.assign(static_cast<std::size_t>(n) * n, -1);
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = 0; b < n; ++b) {
      if (a == b) continue;
      int sv[2];
      if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) {
        fail(ErrorCode::IoError, std::string("socketpair: ") + std::strerror(errno));
      }
      fds_[a * n + b] = sv[0];     // written by node a
      rx_fds_[a * n + b] = sv[1];  // read by node b's receiver
    }
  }
  start_receivers();
}

void SocketRuntime::start_receivers() {
  const std::uint32_t n = config_.node_count;
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const int fd = rx_fds_[a * n + b];
      SocketNode* dst = nodes_[b].get();
      const NodeId from = static_cast<NodeId>(a);
      receivers_.emplace_back([fd, dst, from] {
        for (;;) {
          std::uint8_t lenbuf[4];
          if (!read_all(fd, lenbuf, sizeof(lenbuf))) break;
          const std::uint32_t len = static_cast<std::uint32_t>(lenbuf[0]) |
                                    (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                                    (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                                    (static_cast<std::uint32_t>(lenbuf[3]) << 24);
          Bytes frame(len);
          if (!read_all(fd, frame.data(), len)) break;
          dst->mailbox_.push({from, decode_packet(frame)});
        }
      });
    }
  }
}

void SocketRuntime::run(const std::function<void(SocketNode&)>& program) {
  std::vector<std::thread> threads;
  std::mutex err_mu;
  std::exception_ptr first_error;
  for (auto& node : nodes_) {
    SocketNode* n = node.get();
    threads.emplace_back([&, n] {
      try {
        program(*n);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

NodeMemory& SocketRuntime::memory(NodeId node) {
  if (node >= nodes_.size()) fail(ErrorCode::BadCommand, "rank out of range");
  return nodes_[node]->memory();
}

SocketNode& SocketRuntime::node(NodeId node) {
  if (node >= nodes_.size()) fail(ErrorCode::BadCommand, "rank out of range");
  return *nodes_[node];
}

int SocketRuntime::tx_fd(NodeId from, NodeId to) const {
  const int fd = fds_[static_cast<std::size_t>(from) * config_.node_count + to];
  if (fd < 0) fail(ErrorCode::Unreachable, "no socket between the two ranks");
  return fd;
}

void SocketRuntime::stop() {
  if (stopped_) return;
  stopped_ = true;
  for (auto& node : nodes_) node->mailbox_.close();
  for (int fd : fds_) {
    if (fd >= 0) ::close(fd);
  }
  for (auto& t : receivers_) {
    if (t.joinable()) t.join();
  }
  for (int fd : rx_fds_) {
    if (fd >= 0) ::close(fd);
  }
}

SocketRuntime::~SocketRuntime() { stop(); }

}  // namespace pgasim
