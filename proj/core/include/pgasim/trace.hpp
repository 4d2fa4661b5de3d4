#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace pgasim {

enum class TraceKind : std::uint8_t {
  CommandEnqueued,
  CommandGranted,
  PacketDepart,
  PacketArrive,
  MessageDelivered,
  HandlerBegin,
  HandlerEnd,
  ComputeStart,
  ComputeEnd,
  ArtChunkEmitted,
  BarrierArrive,
  BarrierRelease,
};

/// One timestamped record in the simulation event trace. Field meaning
/// depends on kind; unused fields are zero.
struct TraceEvent {
  std::uint64_t time = 0;
  TraceKind kind = TraceKind::CommandEnqueued;
  std::uint16_t node = 0;   // where the event happened
  std::uint16_t peer = 0;   // other endpoint (packet/message events)
  std::uint8_t opcode = 0;
  std::uint8_t queue = 0;   // TxQueue index for queue events
  std::uint8_t is_reply = 0;
  std::uint64_t seq = 0;
  std::uint64_t token = 0;
  std::uint64_t size = 0;   // bytes or packet frag length

  bool operator==(const TraceEvent&) const = default;
};

/// Append-only trace sink. Disabled by default; tests and diagnostics turn
/// it on. Records arrive in nondecreasing time order.
class Trace {
 public:
  void enable(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_; }

  void emit(const TraceEvent& ev) {
    if (enabled_) events_.push_back(ev);
  }

  const std::vector<TraceEvent>& events() const { return events_; }
  void clear() { events_.clear(); }

  std::size_t count(TraceKind kind) const {
    std::size_t n = 0;
    for (const auto& ev : events_)
      if (ev.kind == kind) ++n;
    return n;
  }

  std::size_t count_if(const std::function<bool(const TraceEvent&)>& pred) const {
    std::size_t n = 0;
    for (const auto& ev : events_)
      if (pred(ev)) ++n;
    return n;
  }

 private:
  bool enabled_ = false;
  std::vector<TraceEvent> events_;
};

}  // namespace pgasim
