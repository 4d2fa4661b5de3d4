#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgasim/api.hpp"

namespace pgasim {

/// Remote-accumulate user handler opcode used by the matmul case study.
inline constexpr std::uint8_t kOpAccum = 0x80;

/// Element-wise int32 add of the long-deposited payload into the shared
/// range named by args (target offset lo/hi, element count).
Handler make_accum_handler();

// ---------------------------------------------------------------------------
// Serial oracles (test references; intentionally naive, 64-bit accumulation)
// ---------------------------------------------------------------------------

std::vector<std::int32_t> serial_matmul_oracle(std::span<const std::int32_t> a,
                                               std::span<const std::int32_t> b,
                                               std::uint32_t m, std::uint32_t k,
                                               std::uint32_t n);

std::vector<std::int32_t> serial_conv_oracle(std::span<const std::int32_t> input,
                                             std::span<const std::int32_t> weights,
                                             std::uint32_t c_in, std::uint32_t h,
                                             std::uint32_t w, std::uint32_t k,
                                             std::uint32_t r, std::uint32_t s);

// ---------------------------------------------------------------------------
// Parallel matmul: C = M x N over 2x2 sub-blocks. Virtual node v holds the
// column block M[:,v], row blocks N[v,0] and N[v,1], and ends up with the
// final column block C[:,v]. Iteration 1 computes the locally destined
// partial M[:,v] * N[v,v]; iteration 2 computes M[:,v] * N[v,1-v] and streams
// it chunk-by-chunk to the peer's accumulate handler while the multiply is
// still running.
// ---------------------------------------------------------------------------

struct MatmulOptions {
  std::uint64_t art_chunk_elems = 1024;
  bool use_art = true;  // false: one end-of-compute transfer instead
  std::uint32_t seed = 1;
};

struct MatmulPlan {
  std::uint32_t size = 0;
  std::uint32_t node_count = 0;
  std::uint64_t chunk_elems = 0;
  std::uint32_t staging_slots = 0;

  struct Slot {
    std::uint64_t m_off, n_own_off, n_other_off, c_off, p2_off, staging_off;
  };
  Slot slots[2];  // indexed by virtual node

  std::uint64_t shared_bytes_needed = 0;

  static MatmulPlan make(std::uint32_t size, std::uint32_t node_count,
                         const MatmulOptions& opt);
  NodeId node_of(std::uint32_t v) const {
    return static_cast<NodeId>(v % node_count);
  }
};

struct WorkloadRun {
  std::uint64_t cycles = 0;
  double seconds = 0.0;
  double gops = 0.0;
  bool verified = false;
};

WorkloadRun run_parallel_matmul(Runtime& rt, std::uint32_t size,
                                const MatmulOptions& opt = {});

// ---------------------------------------------------------------------------
// Parallel convolution: the 64x64xC input is replicated, the kernel set is
// split in half, each node convolves its group and streams its output
// channels to the peer so both nodes end with the full concatenated output.
// ---------------------------------------------------------------------------

struct ConvPreset {
  std::string name;
  std::uint32_t kernels = 0;
  std::uint32_t kernel_dim = 0;  // r == s
  std::uint32_t c_in = 0;
};

const std::vector<ConvPreset>& conv_presets();
const ConvPreset* find_conv_preset(const std::string& name);

struct ConvOptions {
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  std::uint64_t art_chunk_elems = 4096;
  bool use_art = true;
  std::uint32_t seed = 1;
};

struct ConvPlan {
  std::uint32_t c_in = 0, h = 0, w = 0, k = 0, r = 0;
  std::uint32_t node_count = 0;
  std::uint64_t in_off = 0, w_off = 0, out_off = 0;
  std::uint64_t shared_bytes_needed = 0;

  std::uint32_t kernels_per_node() const { return k / node_count; }

  static ConvPlan make(const ConvPreset& preset, const ConvOptions& opt,
                       std::uint32_t node_count);
};

WorkloadRun run_parallel_conv(Runtime& rt, const ConvPreset& preset,
                              const ConvOptions& opt = {});

// Deterministic input generation shared by the drivers and the socket path.
std::vector<std::int32_t> random_i32(std::size_t count, std::uint32_t seed);

}  // namespace pgasim
