#pragma once

#include <memory>
#include <span>
#include <vector>

#include "pgasim/transport.hpp"

namespace pgasim {

struct JobConfig {
  std::uint32_t node_count = 2;
  std::string topology = "ring";
  LinkConfig link;
  SegmentLayout segment{32ull << 20, 1ull << 20};
  std::uint64_t medium_scratch = kDefaultMediumScratch;
  DlaConfig dla;
  CoreConfig core;
  std::uint32_t packet_size = 1024;
  std::uint64_t event_cap = 500'000'000;
  bool trace = false;
};

/// GASNet-style user-facing runtime over the simulated fabric. Construction
/// is two-phase: init validates the job, attach allocates segments and wires
/// the nodes together. One driving context issues operations for all nodes;
/// wait() advances the virtual clock until the handle resolves.
class Runtime {
 public:
  static Runtime init(const JobConfig& config);

  void attach();
  void attach(const SegmentLayout& segment);
  bool attached() const { return fabric_ != nullptr; }

  std::uint32_t node_count() const { return config_.node_count; }
  std::uint64_t now() const;
  double cycles_to_us(std::uint64_t cycles) const;

  /// Remote write: local bytes [src.offset, +src.len) land at dest. The
  /// handle completes at local injection; remote visibility follows the
  /// packet flow (run the clock or barrier for global quiescence).
  Handle put(NodeId node, const GlobalAddress& dest, const SourceDesc& src);

  /// Remote read into a local range; completes when the reply payload has
  /// been written locally.
  Handle get(NodeId node, const GlobalAddress& src, std::uint64_t len,
             Region dest_region, std::uint64_t dest_offset);

  Handle am_request_short(NodeId node, NodeId dst, std::uint8_t opcode,
                          std::span<const std::uint32_t> args);
  Handle am_request_medium(NodeId node, NodeId dst, std::uint8_t opcode,
                           std::span<const std::uint32_t> args,
                           const SourceDesc& payload);
  Handle am_request_long(NodeId node, NodeId dst, std::uint8_t opcode,
                         std::span<const std::uint32_t> args, const SourceDesc& payload,
                         std::uint64_t dest_offset);
  Handle am_request_short(NodeId node, NodeId dst, std::uint8_t opcode,
                          std::initializer_list<std::uint32_t> args) {
    return am_request_short(node, dst, opcode, std::span(args.begin(), args.size()));
  }

  /// Reply operations: legal only inside a handler, at most once per token.
  void am_reply_short(std::uint64_t token, std::uint8_t opcode,
                      std::span<const std::uint32_t> args);
  void am_reply_medium(std::uint64_t token, std::uint8_t opcode,
                       std::span<const std::uint32_t> args, const SourceDesc& payload);
  void am_reply_long(std::uint64_t token, std::uint8_t opcode,
                     std::span<const std::uint32_t> args, const SourceDesc& payload,
                     std::uint64_t dest_offset);

  void barrier();

  void wait(Handle handle);
  HandleState poll(Handle handle) const;

  Handle enqueue_compute(NodeId node, ComputeCommand cmd);
  void register_handler(NodeId node, std::uint8_t opcode, Handler handler);

  std::uint64_t run_until_idle();

  NodeMemory& memory(NodeId node);
  Fabric& fabric();
  const JobConfig& config() const { return config_; }

 private:
  explicit Runtime(JobConfig config) : config_(std::move(config)) {}

  void ensure_attached() const;
  HandlerContext& reply_context(std::uint64_t token);

  JobConfig config_;
  std::unique_ptr<Fabric> fabric_;
};

}  // namespace pgasim
