#include "pgasim/transport.hpp"

#include <algorithm>
#include <utility>

namespace pgasim {

void LinkConfig::validate() const {
  if (bytes_per_cycle == 0 || clock_hz <= 0 || hop_latency_cycles == 0 ||
      packet_overhead_bytes == 0 || min_packet_period_cycles == 0) {
    fail(ErrorCode::InvalidConfig, "link parameters must be positive");
  }
}

Topology Topology::ring(std::uint32_t node_count) {
  Topology t;
  t.node_count = node_count;
  if (node_count == 2) {
    // A 2-ring degenerates to one pair of antiparallel links.
    t.edges = {{0, 1}, {1, 0}};
  } else if (node_count > 2) {
    for (std::uint32_t i = 0; i < node_count; ++i) {
      const NodeId a = static_cast<NodeId>(i);
      const NodeId b = static_cast<NodeId>((i + 1) % node_count);
      t.edges.emplace_back(a, b);
      t.edges.emplace_back(b, a);
    }
  }
  return t;
}

int Topology::link_index(NodeId src, NodeId dst) const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].first == src && edges[i].second == dst) return static_cast<int>(i);
  }
  return -1;
}

std::vector<NodeId> route(const Topology& topo, NodeId src, NodeId dst) {
  if (src == dst) fail(ErrorCode::BadCommand, "route: src == dst");
  if (src >= topo.node_count || dst >= topo.node_count) {
    fail(ErrorCode::Unreachable, "rank outside the topology");
  }
  // BFS over directed edges; neighbors explored in ascending id order so an
  // equal-length path resolves toward increasing ids.
  std::vector<int> prev(topo.node_count, -1);
  std::vector<NodeId> frontier{src};
  prev[src] = src;
  while (!frontier.empty() && prev[dst] == -1) {
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      std::vector<NodeId> neigh;
      for (const auto& [a, b] : topo.edges) {
        if (a == u) neigh.push_back(b);
      }
      std::sort(neigh.begin(), neigh.end());
      for (NodeId v : neigh) {
        if (prev[v] == -1) {
          prev[v] = u;
          next.push_back(v);
        }
      }
    }
    frontier = std::move(next);
  }
  if (prev[dst] == -1) fail(ErrorCode::Unreachable, "no path in topology");
  std::vector<NodeId> path;
  for (NodeId at = dst; at != src; at = static_cast<NodeId>(prev[at])) {
    path.push_back(at);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

Fabric::Fabric(FabricConfig config) : config_(std::move(config)) {
  config_.link.validate();
  const std::uint32_t n = config_.topology.node_count;
  validate_layout(config_.segment, n);
  if (config_.mtu_payload < kHeaderBytes) {
    fail(ErrorCode::MtuTooSmall, "packet size below the 96-byte message header");
  }
  if (config_.dla.macs_per_cycle() == 0) {
    fail(ErrorCode::InvalidConfig, "DLA geometry must be nonzero");
  }
  for (const auto& [a, b] : config_.topology.edges) {
    if (a >= n || b >= n) fail(ErrorCode::InvalidConfig, "edge endpoint out of range");
  }

  trace_.enable(config_.trace);
  nodes_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    nodes_.push_back(std::make_unique<NodeState>(static_cast<NodeId>(i), n,
                                                 config_.segment,
                                                 config_.medium_scratch,
                                                 config_.core));
    NodeState& st = *nodes_.back();
    const NodeId self = static_cast<NodeId>(i);
    st.hooks.compute_submit = [this, self](std::span<const std::uint32_t> args,
                                           std::optional<SourceDesc>) {
      try {
        enqueue_compute(self, decode_compute_args(args));
      } catch (const Error& e) {
        protocol_errors_.emplace_back(e.code(), e.what());
      }
    };
    st.hooks.get_completed = [this](std::uint64_t token) {
      complete_handle_by_token(token, clock_);
    };
    st.hooks.barrier_arrive = [this](NodeId src, std::uint64_t token) {
      on_barrier_arrive(src, token);
    };
    st.hooks.barrier_release = [this, self]() { on_barrier_release(self); };
    st.hooks.protocol_error = [this](ErrorCode code, const std::string& msg) {
      protocol_errors_.emplace_back(code, msg);
    };
    st.hooks.set_active_handler = [this](HandlerContext* ctx) {
      active_handler_ = ctx;
    };
  }

  link_stats_.resize(config_.topology.edges.size());
  link_free_at_.assign(config_.topology.edges.size(), 0);
  for (std::size_t i = 0; i < config_.topology.edges.size(); ++i) {
    link_stats_[i].src = config_.topology.edges[i].first;
    link_stats_[i].dst = config_.topology.edges[i].second;
  }
}

Fabric::NodeState& Fabric::node_at(NodeId node) {
  if (node >= nodes_.size()) {
    fail(ErrorCode::BadCommand, "rank " + std::to_string(node) + " out of range");
  }
  return *nodes_[node];
}

const Fabric::NodeState& Fabric::node_at(NodeId node) const {
  return const_cast<Fabric*>(this)->node_at(node);
}

Handle Fabric::new_handle(NodeId node, std::uint64_t token) {
  node_at(node);
  const Handle h = (static_cast<std::uint64_t>(node) << 48) | ++next_handle_;
  HandleInfo info;
  info.token = token;
  handles_.emplace(h, info);
  if (token != 0) token_handles_[token] = h;
  return h;
}

void Fabric::complete_handle(Handle handle, std::uint64_t time) {
  auto it = handles_.find(handle);
  if (it == handles_.end() || it->second.state != HandleState::Pending) return;
  it->second.state = HandleState::Done;
  it->second.completion_time = time;
}

void Fabric::complete_handle_by_token(std::uint64_t token, std::uint64_t time) {
  auto it = token_handles_.find(token);
  if (it == token_handles_.end()) return;
  complete_handle(it->second, time);
}

Handle Fabric::submit_command(NodeId node, Command cmd) {
  NodeState& st = node_at(node);
  const bool is_request = cmd.kind != CommandKind::AmReply;
  if (is_request && cmd.token == 0) cmd.token = st.core.make_token();
  st.core.submit(TxQueue::Host, cmd);
  const Handle h = new_handle(node, cmd.token);
  if (cmd.kind == CommandKind::Get) {
    st.core.add_pending_get(cmd.token, *cmd.get);
    completion_on_injection_.erase(cmd.token);
  } else {
    completion_on_injection_.insert(cmd.token);
  }
  trace_.emit({clock_, TraceKind::CommandEnqueued, node, cmd.dst, cmd.opcode,
               static_cast<std::uint8_t>(TxQueue::Host), 0, 0, cmd.token, 0});
  kick_node(node);
  return h;
}

void Fabric::register_handler(NodeId node, std::uint8_t opcode, Handler handler) {
  node_at(node).core.register_handler(opcode, std::move(handler));
}

void Fabric::kick_node(NodeId node) {
  NodeState& st = node_at(node);
  if (st.tx_event_pending) return;
  st.tx_event_pending = true;
  const std::uint64_t at = std::max(clock_, st.tx_free_at);
  events_.schedule(at, [this, node] { node_tx(node); });
}

void Fabric::node_tx(NodeId node) {
  NodeState& st = node_at(node);
  st.tx_event_pending = false;
  if (clock_ < st.tx_free_at) {
    kick_node(node);
    return;
  }
  auto cmd = st.core.schedule_next();
  if (!cmd) {
    maybe_barrier_arrive(node);
    return;
  }
  trace_.emit({clock_, TraceKind::CommandGranted, node, cmd->dst, cmd->opcode, 0, 0,
               0, cmd->token, 0});

  NodeCore::SequencedMessage sm;
  try {
    sm = st.core.sequence(*cmd);
  } catch (const Error& e) {
    protocol_errors_.emplace_back(e.code(), e.what());
    kick_node(node);
    return;
  }

  auto msg = std::make_shared<MsgShared>();
  msg->header = sm.header;
  msg->bytes = std::make_shared<const Bytes>(encode_message(sm.header, sm.payload));
  msg->seq = sm.seq;
  msg->final_dst = cmd->dst;
  if (completion_on_injection_.count(sm.header.token)) msg->injected_token = sm.header.token;

  if (cmd->dst == node) {
    // Loopback: served locally, never touches a link.
    if (msg->injected_token != 0) complete_handle_by_token(msg->injected_token, clock_);
    const std::uint64_t t = clock_;
    events_.schedule(t, [this, node, msg, t] { deliver_message(node, msg, t, 0); });
  } else {
    st.tx_free_at = inject_message(node, msg);
  }
  kick_node(node);
}

std::uint64_t Fabric::inject_message(NodeId node, const std::shared_ptr<MsgShared>& msg) {
  const NodeId dst = msg->final_dst;
  const auto path = route(config_.topology, node, dst);
  const NodeId next = path.front();
  const int li = config_.topology.link_index(node, next);
  if (li < 0) fail(ErrorCode::Unreachable, "missing link on routed path");

  const LinkConfig& lc = config_.link;
  LinkStats& stats = link_stats_[li];
  std::uint64_t& link_free = link_free_at_[li];

  const std::uint64_t total = msg->bytes->size();
  const std::uint32_t mtu = config_.mtu_payload;
  const std::uint32_t count = static_cast<std::uint32_t>((total + mtu - 1) / mtu);
  const bool tracing = trace_.enabled();

  std::uint64_t request = clock_;
  std::uint64_t depart = clock_;
  std::uint64_t arrive_first = 0;
  std::uint64_t arrive_last = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t frag =
        std::min<std::uint64_t>(mtu, total - static_cast<std::uint64_t>(i) * mtu);
    const std::uint64_t ser = lc.serialization_cycles(frag);
    const std::uint64_t occupy = std::max<std::uint64_t>(ser, lc.min_packet_period_cycles);
    depart = std::max(request, link_free);
    link_free = depart + occupy;
    const std::uint64_t arrive = depart + ser + lc.hop_latency_cycles;
    if (i == 0) arrive_first = arrive;
    arrive_last = arrive;
    request = depart;

    stats.packets += 1;
    stats.body_bytes += frag;
    stats.occupied_cycles += occupy;
    if (tracing) {
      const std::uint64_t seq = msg->seq;
      events_.schedule(depart, [this, node, next, seq, i, frag, depart] {
        trace_.emit({depart, TraceKind::PacketDepart, node, next, 0, 0, 0, seq, i, frag});
      });
      events_.schedule(arrive, [this, node, next, seq, i, frag, arrive] {
        trace_.emit({arrive, TraceKind::PacketArrive, next, node, 0, 0, 0, seq, i, frag});
      });
    }
  }
  stats.payload_bytes += msg->header.payload_len;

  if (msg->injected_token != 0 && node == msg->header.src) {
    const std::uint64_t token = msg->injected_token;
    events_.schedule(depart, [this, token] { complete_handle_by_token(token, clock_); });
  }

  if (next == dst) {
    events_.schedule(arrive_last, [this, next, msg, arrive_first, count] {
      deliver_message(next, msg, arrive_first, count);
    });
  } else {
    // Intermediate hop: store-and-forward at message granularity keeps each
    // output link free of interleaved fragments.
    events_.schedule(arrive_last, [this, next, msg] { inject_message(next, msg); });
  }
  return depart;
}

void Fabric::deliver_message(NodeId node, const std::shared_ptr<MsgShared>& msg,
                             std::uint64_t t_header, std::uint32_t packets) {
  auto [header, payload] = decode_message(*msg->bytes);

  DeliveryRecord rec;
  rec.seq = msg->seq;
  rec.token = header.token;
  rec.kind = header.kind;
  rec.opcode = header.opcode;
  rec.src = header.src;
  rec.dst = node;
  rec.payload_len = header.payload_len;
  rec.packets = packets;
  rec.t_header = t_header;
  rec.t_delivered = clock_;
  delivery_index_[rec.token * 2 + static_cast<std::uint64_t>(rec.kind)] =
      deliveries_.size();
  deliveries_.push_back(rec);

  trace_.emit({clock_, TraceKind::MessageDelivered, node, header.src, header.opcode, 0,
               header.kind == MessageKind::Reply, msg->seq, header.token,
               header.payload_len});

  NodeState& st = node_at(node);
  try {
    st.core.deliver(header, payload, st.hooks, &trace_, clock_);
  } catch (const Error& e) {
    active_handler_ = nullptr;  // a throwing handler never reached its scope exit
    protocol_errors_.emplace_back(e.code(), e.what());
  }
  kick_node(node);
}

Handle Fabric::enqueue_compute(NodeId node, ComputeCommand cmd) {
  NodeState& st = node_at(node);
  validate_command(cmd, st.memory);
  const Handle h = new_handle(node, 0);
  st.compute_fifo.push_back({std::move(cmd), h});
  events_.schedule(clock_, [this, node] { compute_try_start(node); });
  return h;
}

void Fabric::compute_try_start(NodeId node) {
  NodeState& st = node_at(node);
  if (st.compute_busy || st.compute_fifo.empty()) return;
  st.compute_busy = true;
  st.current_job = std::move(st.compute_fifo.front());
  st.compute_fifo.pop_front();

  const ComputeCommand& cmd = st.current_job->cmd;
  run_functional(st.memory, cmd);  // numerics are timing-independent
  const std::uint64_t cycles = model_cycles(cmd, config_.dla);
  const std::uint64_t t0 = clock_;

  trace_.emit({t0, TraceKind::ComputeStart, node, 0, 0, 0, 0, 0, 0, compute_macs(cmd)});

  if (cmd.art) {
    // Chunk events carry their own config: they may outlive the command when
    // queue backpressure delays emission.
    const ArtConfig art = *cmd.art;
    const SourceDesc results = result_range(cmd);
    const auto chunks = art_chunks(result_count(cmd), art.every_n_results, cycles);
    st.art_pending += chunks.size();
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const ArtChunk ch = chunks[i];
      events_.schedule(t0 + ch.emit_cycle, [this, node, art, results, i, ch] {
        art_emit(node, art, results, i, ch);
      });
    }
  }
  events_.schedule(t0 + cycles, [this, node] { compute_finish(node); });
}

void Fabric::compute_finish(NodeId node) {
  NodeState& st = node_at(node);
  const ComputeJob& job = *st.current_job;
  if (job.cmd.ack_offset) {
    const std::uint32_t flag = 1;
    st.memory.dma_write(Region::Private, *job.cmd.ack_offset,
                        {reinterpret_cast<const std::uint8_t*>(&flag), sizeof(flag)});
  }
  trace_.emit({clock_, TraceKind::ComputeEnd, node, 0, 0, 0, 0, 0, 0,
               result_count(job.cmd)});
  complete_handle(job.handle, clock_);
  st.current_job.reset();
  st.compute_busy = false;
  compute_try_start(node);
}

void Fabric::art_emit(NodeId node, const ArtConfig& art, const SourceDesc& results,
                      std::uint64_t chunk_index, const ArtChunk& chunk) {
  NodeState& st = node_at(node);
  const std::uint64_t esz = art.element_size;
  const std::uint64_t byte_off = chunk.first_elem * esz;
  const std::uint64_t byte_len = chunk.elem_count * esz;

  Command c;
  c.dst = art.dest_node;
  c.variant = Variant::Long;
  c.payload = SourceDesc{Region::Shared, results.offset + byte_off, byte_len};
  c.token = st.core.make_token();
  if (art.opcode == kOpPut) {
    c.kind = CommandKind::Put;
    c.dest_offset = art.dest_offset + byte_off;
  } else {
    c.kind = CommandKind::AmRequest;
    c.opcode = art.opcode;
    const std::uint64_t slot =
        art.staging_offset +
        (chunk_index % art.staging_slots) * (art.every_n_results * esz);
    c.dest_offset = slot;
    const std::uint64_t target = art.dest_offset + byte_off;
    c.set_args({static_cast<std::uint32_t>(target),
                static_cast<std::uint32_t>(target >> 32),
                static_cast<std::uint32_t>(chunk.elem_count)});
  }

  try {
    st.core.submit(TxQueue::Compute, c);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::QueueFull) {
      // Backpressure: retry once the sequencer has had a chance to drain.
      events_.schedule(clock_ + config_.link.min_packet_period_cycles,
                       [this, node, art, results, chunk_index, chunk] {
                         art_emit(node, art, results, chunk_index, chunk);
                       });
      return;
    }
    --st.art_pending;
    protocol_errors_.emplace_back(e.code(), e.what());
    return;
  }
  --st.art_pending;
  ++art_chunks_emitted_;
  art_payload_bytes_ += byte_len;
  trace_.emit({clock_, TraceKind::ArtChunkEmitted, node, art.dest_node, art.opcode,
               static_cast<std::uint8_t>(TxQueue::Compute), 0, 0, c.token, byte_len});
  kick_node(node);
}

void Fabric::maybe_barrier_arrive(NodeId node) {
  NodeState& st = node_at(node);
  if (!st.barrier_armed || !st.core.queues_empty() || st.art_pending != 0) return;
  st.barrier_armed = false;
  Command arrive;
  arrive.kind = CommandKind::AmRequest;
  arrive.dst = 0;
  arrive.variant = Variant::Short;
  arrive.opcode = kOpBarrierArrive;
  arrive.token = st.core.make_token();
  st.core.submit(TxQueue::Host, arrive);
  kick_node(node);
}

void Fabric::on_barrier_arrive(NodeId src, std::uint64_t token) {
  if (!barrier_.active) {
    protocol_errors_.emplace_back(ErrorCode::BadCommand, "stray barrier arrive");
    return;
  }
  ++barrier_.arrived;
  barrier_.last_arrive_time = clock_;
  trace_.emit({clock_, TraceKind::BarrierArrive, 0, src, kOpBarrierArrive, 0, 0, 0,
               token, 0});
  if (barrier_.arrived == node_count()) {
    NodeState& root = node_at(0);
    for (std::uint32_t i = 0; i < node_count(); ++i) {
      Command release;
      release.kind = CommandKind::AmRequest;
      release.dst = static_cast<NodeId>(i);
      release.variant = Variant::Short;
      release.opcode = kOpBarrierRelease;
      release.token = root.core.make_token();
      root.core.submit(TxQueue::Host, release);
    }
    kick_node(0);
  }
}

void Fabric::on_barrier_release(NodeId node) {
  if (!barrier_.active) return;
  barrier_.released[node] = 1;
  trace_.emit({clock_, TraceKind::BarrierRelease, node, 0, kOpBarrierRelease, 0, 0, 0,
               0, 0});
  if (std::all_of(barrier_.released.begin(), barrier_.released.end(),
                  [](std::uint8_t r) { return r != 0; })) {
    barrier_.active = false;
    barrier_.done_time = clock_;
  }
}

void Fabric::barrier() {
  if (node_count() > 1) {
    if (barrier_.active) fail(ErrorCode::BadCommand, "barrier already in progress");
    barrier_.active = true;
    barrier_.arrived = 0;
    barrier_.released.assign(node_count(), 0);
    for (std::uint32_t i = 0; i < node_count(); ++i) {
      nodes_[i]->barrier_armed = true;
      kick_node(static_cast<NodeId>(i));
    }
    while (barrier_.active) {
      if (events_.empty()) fail(ErrorCode::LivelockGuard, "barrier stalled");
      step();
    }
  }
  // Local quiescence: drain the zero-delay work already due at this instant
  // (loopback deliveries, completion records) without advancing the clock.
  while (!events_.empty() && events_.next_time() <= clock_) step();
  barrier_.done_time = clock_;
}

void Fabric::step() {
  auto [t, fn] = events_.pop();
  clock_ = t;
  if (++events_processed_ > config_.event_cap) {
    fail(ErrorCode::LivelockGuard,
         "event cap of " + std::to_string(config_.event_cap) + " exceeded");
  }
  fn();
}

std::uint64_t Fabric::run_until_idle() {
  while (!events_.empty()) step();
  return clock_;
}

void Fabric::wait(Handle handle) {
  auto it = handles_.find(handle);
  if (it == handles_.end()) fail(ErrorCode::UnknownHandle, std::to_string(handle));
  while (it->second.state == HandleState::Pending) {
    if (events_.empty()) {
      fail(ErrorCode::LivelockGuard, "simulation drained with the handle pending");
    }
    step();
  }
  if (it->second.state == HandleState::Error) {
    throw Error(it->second.error, it->second.error_msg);
  }
}

HandleState Fabric::poll(Handle handle) const {
  auto it = handles_.find(handle);
  if (it == handles_.end()) fail(ErrorCode::UnknownHandle, std::to_string(handle));
  return it->second.state;
}

std::uint64_t Fabric::completion_time(Handle handle) const {
  auto it = handles_.find(handle);
  if (it == handles_.end()) fail(ErrorCode::UnknownHandle, std::to_string(handle));
  return it->second.completion_time;
}

std::uint64_t Fabric::handle_token(Handle handle) const {
  auto it = handles_.find(handle);
  if (it == handles_.end()) fail(ErrorCode::UnknownHandle, std::to_string(handle));
  return it->second.token;
}

const DeliveryRecord* Fabric::find_delivery(std::uint64_t token,
                                            MessageKind kind) const {
  auto it = delivery_index_.find(token * 2 + static_cast<std::uint64_t>(kind));
  if (it == delivery_index_.end()) return nullptr;
  return &deliveries_[it->second];
}

}  // namespace pgasim
