#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "pgasim/compute.hpp"
#include "pgasim/core.hpp"
#include "pgasim/memory.hpp"
#include "pgasim/wire.hpp"

namespace pgasim {

/// Real stream-socket transport. Nodes live in one process, one program
/// thread per node, joined pairwise by AF_UNIX stream socketpairs carrying
/// the exact wire bytes: each packet framed as [u32 length][packet bytes].
/// One receiver thread per incoming link hands packets to the owning node's
/// mailbox in order. Timing here is wall-clock and informational only.
struct SocketConfig {
  std::uint32_t node_count = 2;
  SegmentLayout segment{32ull << 20, 1ull << 20};
  std::uint64_t medium_scratch = kDefaultMediumScratch;
  CoreConfig core;
  DlaConfig dla;
  std::uint32_t packet_size = 1024;
  std::size_t mailbox_capacity = 16384;
  std::uint32_t wait_timeout_ms = 10000;
};

class SocketRuntime;

/// Per-node operations; call only from that node's program thread.
class SocketNode {
 public:
  NodeId id() const { return self_; }
  NodeMemory& memory() { return *memory_; }
  std::uint32_t node_count() const;

  void register_handler(std::uint8_t opcode, Handler handler);

  Handle put(const GlobalAddress& dest, const SourceDesc& src);
  Handle get(const GlobalAddress& src, std::uint64_t len, Region dest_region,
             std::uint64_t dest_offset);
  Handle am_request_short(NodeId dst, std::uint8_t opcode,
                          std::span<const std::uint32_t> args);
  Handle am_request_medium(NodeId dst, std::uint8_t opcode,
                           std::span<const std::uint32_t> args,
                           const SourceDesc& payload);
  Handle am_request_long(NodeId dst, std::uint8_t opcode,
                         std::span<const std::uint32_t> args, const SourceDesc& payload,
                         std::uint64_t dest_offset);

  /// Functional compute: kernels run immediately; ART chunks stream through
  /// the normal command path right away (no modeled compute time here).
  Handle enqueue_compute(ComputeCommand cmd);

  void wait(Handle handle);
  HandleState poll(Handle handle) const;
  void barrier();

 private:
  friend class SocketRuntime;

  struct Incoming {
    NodeId from;
    Packet packet;
  };

  class Mailbox {
   public:
    explicit Mailbox(std::size_t capacity) : capacity_(capacity) {}
    void push(Incoming item);
    bool pop(Incoming& out, std::uint32_t timeout_ms);
    void close();

   private:
    std::mutex mu_;
    std::condition_variable can_push_;
    std::condition_variable can_pop_;
    std::deque<Incoming> items_;
    std::size_t capacity_;
    bool closed_ = false;
  };

  SocketNode(SocketRuntime& rt, NodeId self, std::uint32_t node_count,
             const SocketConfig& cfg);

  Handle submit(Command cmd);
  Handle new_handle(bool done);
  void pump_tx();
  void send_message(NodeId dst, const MessageHeader& header, const Bytes& encoded,
                    std::uint64_t seq);
  void deliver_bytes(const Bytes& message);
  void process_incoming(const Incoming& in);
  bool drain_one(std::uint32_t timeout_ms);

  SocketRuntime& rt_;
  NodeId self_;
  std::uint32_t node_count_;
  const SocketConfig& cfg_;
  std::unique_ptr<NodeMemory> memory_;
  std::unique_ptr<NodeCore> core_;
  DispatchHooks hooks_;
  Mailbox mailbox_;

  struct Partial {
    std::vector<Packet> packets;
  };
  std::vector<Partial> partial_;  // indexed by source node

  struct HandleSlot {
    HandleState state = HandleState::Pending;
    std::uint64_t token = 0;
  };
  std::unordered_map<Handle, HandleSlot> handles_;
  std::unordered_map<std::uint64_t, Handle> token_handles_;
  std::uint64_t next_handle_ = 0;

  std::uint32_t barrier_arrived_ = 0;
  std::uint64_t barrier_generation_ = 0;
  std::uint64_t barrier_released_gen_ = 0;
  HandlerContext* active_handler_ = nullptr;
};

class SocketRuntime {
 public:
  explicit SocketRuntime(SocketConfig config);
  ~SocketRuntime();

  SocketRuntime(const SocketRuntime&) = delete;
  SocketRuntime& operator=(const SocketRuntime&) = delete;

  std::uint32_t node_count() const { return config_.node_count; }

  /// Runs `program` on every node concurrently and joins. The first
  /// exception thrown by any node program is rethrown here.
  void run(const std::function<void(SocketNode&)>& program);

  NodeMemory& memory(NodeId node);
  SocketNode& node(NodeId node);

 private:
  friend class SocketNode;

  int tx_fd(NodeId from, NodeId to) const;
  void start_receivers();
  void stop();

  SocketConfig config_;
  std::vector<std::unique_ptr<SocketNode>> nodes_;
  std::vector<int> fds_;  // tx fd per ordered pair (from * n + to); -1 unused
  std::vector<int> rx_fds_;
  std::vector<std::thread> receivers_;
  bool stopped_ = false;
};

}  // namespace pgasim
