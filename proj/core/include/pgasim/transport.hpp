#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pgasim/compute.hpp"
#include "pgasim/core.hpp"
#include "pgasim/memory.hpp"
#include "pgasim/trace.hpp"
#include "pgasim/wire.hpp"

namespace pgasim {

/// Link timing model. The defaults are calibrated: 16 bytes/cycle at 250 MHz
/// is the 4000 MB/s physical peak; packet_overhead_bytes and
/// min_packet_period_cycles shape per-packet efficiency; hop_latency_cycles
/// covers sequencer pipeline plus flight time.
struct LinkConfig {
  std::uint32_t bytes_per_cycle = 16;
  double clock_hz = 250e6;
  std::uint64_t hop_latency_cycles = 47;
  std::uint32_t packet_overhead_bytes = 16;
  std::uint32_t min_packet_period_cycles = 12;

  void validate() const;

  std::uint64_t serialization_cycles(std::uint64_t frag_len) const {
    return (frag_len + packet_overhead_bytes + bytes_per_cycle - 1) / bytes_per_cycle;
  }
  double cycles_to_us(std::uint64_t cycles) const {
    return static_cast<double>(cycles) * 1e6 / clock_hz;
  }
  double peak_mbs() const { return bytes_per_cycle * clock_hz / 1e6; }
};

struct Topology {
  std::uint32_t node_count = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;  // directed

  static Topology ring(std::uint32_t node_count);
  int link_index(NodeId src, NodeId dst) const;
};

/// Shortest ring path from src, excluding src and ending at dst; ties broken
/// toward increasing node id. Throws BadCommand on src == dst, Unreachable
/// when no path exists.
std::vector<NodeId> route(const Topology& topo, NodeId src, NodeId dst);

/// Deterministic discrete-event scheduler: events fire in (time, insertion
/// order).
class EventQueue {
 public:
  using Fn = std::function<void()>;

  void schedule(std::uint64_t time, Fn fn) {
    heap_.push(Entry{time, next_seq_++, std::move(fn)});
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t next_time() const { return heap_.top().time; }

  std::pair<std::uint64_t, Fn> pop() {
    Entry e = std::move(const_cast<Entry&>(heap_.top()));
    heap_.pop();
    return {e.time, std::move(e.fn)};
  }

 private:
  struct Entry {
    std::uint64_t time;
    std::uint64_t seq;
    Fn fn;
    bool operator>(const Entry& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap_;
  std::uint64_t next_seq_ = 0;
};

struct FabricConfig {
  Topology topology = Topology::ring(2);
  LinkConfig link;
  SegmentLayout segment{32ull << 20, 1ull << 20};
  std::uint64_t medium_scratch = kDefaultMediumScratch;
  DlaConfig dla;
  CoreConfig core;
  std::uint32_t mtu_payload = 1024;  // packet body bytes
  std::uint64_t event_cap = 500'000'000;
  bool trace = false;
};

/// Completion/latency bookkeeping per delivered message.
struct DeliveryRecord {
  std::uint64_t seq = 0;
  std::uint64_t token = 0;
  MessageKind kind = MessageKind::Request;
  std::uint8_t opcode = 0;
  NodeId src = 0;
  NodeId dst = 0;
  std::uint64_t payload_len = 0;
  std::uint32_t packets = 0;      // on the final hop (0 for loopback)
  std::uint64_t t_header = 0;     // first-packet arrival at the destination
  std::uint64_t t_delivered = 0;  // last byte written
};

struct LinkStats {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint64_t packets = 0;
  std::uint64_t body_bytes = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t occupied_cycles = 0;
};

/// The discrete-event runtime: nodes (core + memory + compute engine) joined
/// by calibrated point-to-point links, all driven by one virtual clock.
class Fabric {
 public:
  explicit Fabric(FabricConfig config);

  std::uint64_t now() const { return clock_; }
  std::uint32_t node_count() const { return config_.topology.node_count; }
  std::uint32_t mtu() const { return config_.mtu_payload; }
  const LinkConfig& link_config() const { return config_.link; }
  const DlaConfig& dla_config() const { return config_.dla; }

  NodeMemory& memory(NodeId node) { return node_at(node).memory; }
  NodeCore& core(NodeId node) { return node_at(node).core; }
  Trace& trace() { return trace_; }

  /// Host-sourced command submission. Requests get a fresh token when none
  /// is set. Returns a completion handle: puts and AM requests complete at
  /// local injection, gets at reply delivery.
  Handle submit_command(NodeId node, Command cmd);

  Handle enqueue_compute(NodeId node, ComputeCommand cmd);

  void register_handler(NodeId node, std::uint8_t opcode, Handler handler);

  /// Centralized barrier through node 0: quiesces each node's transmit side,
  /// short ARRIVE to node 0, RELEASE fan-out once everyone arrived. Drives
  /// the event loop until every node is released.
  void barrier();

  std::uint64_t run_until_idle();
  void wait(Handle handle);
  HandleState poll(Handle handle) const;
  std::uint64_t completion_time(Handle handle) const;
  std::uint64_t handle_token(Handle handle) const;

  const std::vector<DeliveryRecord>& deliveries() const { return deliveries_; }
  const DeliveryRecord* find_delivery(std::uint64_t token, MessageKind kind) const;

  const std::vector<LinkStats>& link_stats() const { return link_stats_; }
  const std::vector<std::pair<ErrorCode, std::string>>& protocol_errors() const {
    return protocol_errors_;
  }

  std::uint64_t art_chunks_emitted() const { return art_chunks_emitted_; }
  std::uint64_t art_payload_bytes() const { return art_payload_bytes_; }

  /// Active user-handler context while a handler runs, else nullptr; backs
  /// the reply-only-from-a-handler rule.
  HandlerContext* active_handler() { return active_handler_; }

  double cycles_to_us(std::uint64_t cycles) const {
    return config_.link.cycles_to_us(cycles);
  }

 private:
  struct MsgShared {
    MessageHeader header;
    std::shared_ptr<const Bytes> bytes;
    std::uint64_t seq = 0;
    NodeId final_dst = 0;
    std::uint64_t injected_token = 0;  // handle to complete at injection
  };

  struct ComputeJob {
    ComputeCommand cmd;
    Handle handle;
  };

  struct NodeState {
    std::unique_ptr<NodeMemory> memory_ptr;
    NodeMemory& memory;
    NodeCore core;
    DispatchHooks hooks;
    bool tx_event_pending = false;
    std::uint64_t tx_free_at = 0;
    bool barrier_armed = false;
    std::deque<ComputeJob> compute_fifo;
    bool compute_busy = false;
    std::optional<ComputeJob> current_job;
    std::uint64_t art_pending = 0;  // chunks scheduled but not yet enqueued

    NodeState(NodeId self, std::uint32_t node_count, const SegmentLayout& seg,
              std::uint64_t scratch, CoreConfig cc)
        : memory_ptr(std::make_unique<NodeMemory>(seg, scratch)),
          memory(*memory_ptr),
          core(self, node_count, memory_ptr.get(), cc) {}
  };

  struct HandleInfo {
    HandleState state = HandleState::Pending;
    std::uint64_t completion_time = 0;
    std::uint64_t token = 0;
    ErrorCode error = ErrorCode::LivelockGuard;
    std::string error_msg;
  };

  struct BarrierState {
    bool active = false;
    std::uint32_t arrived = 0;
    std::vector<std::uint8_t> released;
    std::uint64_t last_arrive_time = 0;
    std::uint64_t done_time = 0;
  };

  NodeState& node_at(NodeId node);
  const NodeState& node_at(NodeId node) const;

  Handle new_handle(NodeId node, std::uint64_t token);
  void complete_handle(Handle handle, std::uint64_t time);
  void complete_handle_by_token(std::uint64_t token, std::uint64_t time);

  void step();
  void kick_node(NodeId node);
  void node_tx(NodeId node);
  void deliver_message(NodeId node, const std::shared_ptr<MsgShared>& msg,
                       std::uint64_t t_header, std::uint32_t packets);

  void compute_try_start(NodeId node);
  void compute_finish(NodeId node);
  void art_emit(NodeId node, const ArtConfig& art, const SourceDesc& results,
                std::uint64_t chunk_index, const ArtChunk& chunk);

  std::uint64_t inject_message(NodeId node, const std::shared_ptr<MsgShared>& msg);

  void maybe_barrier_arrive(NodeId node);
  void on_barrier_arrive(NodeId src, std::uint64_t token);
  void on_barrier_release(NodeId node);

  FabricConfig config_;
  std::vector<std::unique_ptr<NodeState>> nodes_;
  std::vector<LinkStats> link_stats_;
  std::vector<std::uint64_t> link_free_at_;
  EventQueue events_;
  std::uint64_t clock_ = 0;
  std::uint64_t events_processed_ = 0;
  Trace trace_;

  std::uint64_t next_handle_ = 0;
  std::unordered_map<Handle, HandleInfo> handles_;
  std::unordered_map<std::uint64_t, Handle> token_handles_;
  std::unordered_set<std::uint64_t> completion_on_injection_;

  std::vector<DeliveryRecord> deliveries_;
  std::unordered_map<std::uint64_t, std::size_t> delivery_index_;  // token*2+kind

  std::vector<std::pair<ErrorCode, std::string>> protocol_errors_;
  BarrierState barrier_;
  HandlerContext* active_handler_ = nullptr;

  std::uint64_t art_chunks_emitted_ = 0;
  std::uint64_t art_payload_bytes_ = 0;
};

}  // namespace pgasim
