#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "pgasim/core.hpp"
#include "pgasim/memory.hpp"

namespace pgasim {

/// Systolic-array accelerator model. The default geometry peaks at
/// 16 x 8 PEs x 16 MACs/PE/cycle x 2 ops x 250 MHz = 1024 GOPS.
struct DlaConfig {
  std::uint32_t pe_rows = 16;
  std::uint32_t pe_cols = 8;
  std::uint32_t macs_per_pe_per_cycle = 16;
  double clock_hz = 250e6;
  /// Fixed per-command pipeline fill/drain cost. Calibrated so a full
  /// 1024^3 multiply lands at ~979 GOPS effective.
  std::uint64_t drain_overhead_cycles = 24000;

  std::uint64_t macs_per_cycle() const {
    return static_cast<std::uint64_t>(pe_rows) * pe_cols * macs_per_pe_per_cycle;
  }
  double peak_gops() const { return macs_per_cycle() * 2.0 * clock_hz / 1e9; }
};

/// Automatic result transfer: emit one outbound chunk for every N valid
/// results instead of a single transfer at the end of the computation.
struct ArtConfig {
  std::uint64_t every_n_results = 0;  // N
  NodeId dest_node = 0;
  std::uint64_t dest_offset = 0;  // advances contiguously chunk by chunk
  std::uint32_t element_size = 4;
  /// kOpPut streams plain long puts; a user opcode sends long AM requests
  /// whose payload lands in a staging ring at the destination before the
  /// handler runs (accumulate-style handlers need the old contents intact).
  std::uint8_t opcode = kOpPut;
  std::uint64_t staging_offset = 0;
  std::uint32_t staging_slots = 8;
};

struct MatMulDesc {
  std::uint32_t m = 0, k = 0, n = 0;
  std::uint64_t a_offset = 0, b_offset = 0, c_offset = 0;
  bool accumulate = false;  // C += A*B instead of C = A*B
};

/// Stride-1 same-padding convolution; r and s must be odd.
struct Conv2dDesc {
  std::uint32_t c_in = 0, h = 0, w = 0;
  std::uint32_t k = 0, r = 0, s = 0;
  std::uint64_t in_offset = 0, w_offset = 0, out_offset = 0;
};

/// Element-wise 32-bit add of a staged range into a destination range.
struct AccumulateDesc {
  std::uint64_t dst_offset = 0;
  std::uint64_t src_offset = 0;
  std::uint64_t elem_count = 0;
};

struct ComputeCommand {
  std::variant<MatMulDesc, Conv2dDesc, AccumulateDesc> op;
  std::optional<ArtConfig> art;
  /// Private-memory location where the engine writes a completion flag.
  std::optional<std::uint64_t> ack_offset;
};

std::uint64_t compute_macs(const ComputeCommand& cmd);
std::uint64_t model_cycles(const ComputeCommand& cmd, const DlaConfig& dla);

/// Number of result elements the command produces and where they land.
std::uint64_t result_count(const ComputeCommand& cmd);
SourceDesc result_range(const ComputeCommand& cmd);

/// Throws BadDims / OutOfBounds. All operand offsets are shared-segment
/// offsets and must be 4-byte aligned.
void validate_command(const ComputeCommand& cmd, const NodeMemory& memory);

/// Runs the arithmetic exactly (32-bit integer elements); numerics are
/// independent of ART and of all timing parameters.
void run_functional(NodeMemory& memory, const ComputeCommand& cmd);

/// One ART emission: elements [first_elem, first_elem + elem_count) become
/// transferable `emit_cycle` cycles after the command starts.
struct ArtChunk {
  std::uint64_t first_elem = 0;
  std::uint64_t elem_count = 0;
  std::uint64_t emit_cycle = 0;
};

/// Chunk schedule under the uniform result-production model: chunk i is
/// emitted once its last element is produced, the final partial chunk at
/// command completion.
std::vector<ArtChunk> art_chunks(std::uint64_t results, std::uint64_t every_n,
                                 std::uint64_t total_cycles);

/// Arg codec for dispatching compute commands through COMPUTE-opcode active
/// messages (offsets capped at 4 GiB on this path; ART does not travel).
struct EncodedComputeArgs {
  std::array<std::uint32_t, kMaxArgs> args{};
  std::uint8_t count = 0;
};
EncodedComputeArgs encode_compute_args(const ComputeCommand& cmd);
ComputeCommand decode_compute_args(std::span<const std::uint32_t> args);

/// Raw kernels on packed row-major int32 blocks.
void matmul_i32(const std::int32_t* a, const std::int32_t* b, std::int32_t* c,
                std::uint32_t m, std::uint32_t k, std::uint32_t n, bool accumulate);
void conv2d_i32(const std::int32_t* in, const std::int32_t* w, std::int32_t* out,
                std::uint32_t c_in, std::uint32_t h, std::uint32_t width,
                std::uint32_t k, std::uint32_t r, std::uint32_t s);

}  // namespace pgasim
