#include "pgasim/workloads.hpp"

#include <algorithm>
#include <cstring>
#include <random>

namespace pgasim {

namespace {

constexpr std::uint64_t kAlign = 64;

std::uint64_t align_up(std::uint64_t v) { return (v + kAlign - 1) & ~(kAlign - 1); }

void write_i32(NodeMemory& mem, std::uint64_t offset, std::span<const std::int32_t> v) {
  mem.dma_write(Region::Shared, offset,
                {reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * 4});
}

std::vector<std::int32_t> read_i32(NodeMemory& mem, std::uint64_t offset,
                                   std::size_t count) {
  std::vector<std::int32_t> out(count);
  const Bytes raw = mem.dma_read(Region::Shared, offset, count * 4);
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void zero_range(NodeMemory& mem, std::uint64_t offset, std::uint64_t bytes) {
  const Bytes zeros(bytes, 0);
  mem.dma_write(Region::Shared, offset, zeros);
}

/// Extracts the packed (rows x cols) block starting at (row0, col0) of a
/// row-major (dim x dim) matrix.
std::vector<std::int32_t> block_of(const std::vector<std::int32_t>& m,
                                   std::uint32_t dim, std::uint32_t row0,
                                   std::uint32_t col0, std::uint32_t rows,
                                   std::uint32_t cols) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    std::memcpy(out.data() + static_cast<std::size_t>(r) * cols,
                m.data() + static_cast<std::size_t>(row0 + r) * dim + col0,
                cols * sizeof(std::int32_t));
  }
  return out;
}

void ensure_fits(const Runtime& rt, std::uint64_t needed) {
  if (needed > rt.config().segment.shared_size) {
    fail(ErrorCode::OutOfBounds,
         "workload needs " + std::to_string(needed) +
             " shared bytes but the segment has " +
             std::to_string(rt.config().segment.shared_size));
  }
}

void register_accum(Runtime& rt) {
  for (std::uint32_t n = 0; n < rt.node_count(); ++n) {
    try {
      rt.register_handler(static_cast<NodeId>(n), kOpAccum, make_accum_handler());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AlreadyRegistered) throw;
    }
  }
}

}  // namespace

Handler make_accum_handler() {
  return [](HandlerContext& ctx) {
    const auto args = ctx.args();
    const std::uint64_t target =
        static_cast<std::uint64_t>(args[0]) | (static_cast<std::uint64_t>(args[1]) << 32);
    const std::uint32_t elems = args[2];
    auto shared = ctx.memory().view(Region::Shared);
    const SourceDesc& at = *ctx.payload();
    const std::int32_t* src =
        reinterpret_cast<const std::int32_t*>(shared.data() + at.offset);
    std::int32_t* dst = reinterpret_cast<std::int32_t*>(shared.data() + target);
    for (std::uint32_t i = 0; i < elems; ++i) dst[i] += src[i];
  };
}

std::vector<std::int32_t> random_i32(std::size_t count, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::int32_t> dist(-128, 127);
  std::vector<std::int32_t> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

std::vector<std::int32_t> serial_matmul_oracle(std::span<const std::int32_t> a,
                                               std::span<const std::int32_t> b,
                                               std::uint32_t m, std::uint32_t k,
                                               std::uint32_t n) {
  if (m == 0 || k == 0 || n == 0 || a.size() != static_cast<std::size_t>(m) * k ||
      b.size() != static_cast<std::size_t>(k) * n) {
    fail(ErrorCode::BadDims, "matmul oracle operand shapes");
  }
  // Column copy keeps the dot products sequential; accumulation stays 64-bit.
  std::vector<std::int32_t> bt(static_cast<std::size_t>(n) * k);
  for (std::uint32_t l = 0; l < k; ++l) {
    for (std::uint32_t j = 0; j < n; ++j) {
      bt[static_cast<std::size_t>(j) * k + l] = b[static_cast<std::size_t>(l) * n + j];
    }
  }
  std::vector<std::int32_t> c(static_cast<std::size_t>(m) * n);
  for (std::uint32_t i = 0; i < m; ++i) {
    const std::int32_t* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (std::uint32_t j = 0; j < n; ++j) {
      const std::int32_t* bcol = bt.data() + static_cast<std::size_t>(j) * k;
      std::int64_t acc = 0;
      for (std::uint32_t l = 0; l < k; ++l) {
        acc += static_cast<std::int64_t>(arow[l]) * bcol[l];
      }
      c[static_cast<std::size_t>(i) * n + j] = static_cast<std::int32_t>(acc);
    }
  }
  return c;
}

std::vector<std::int32_t> serial_conv_oracle(std::span<const std::int32_t> input,
                                             std::span<const std::int32_t> weights,
                                             std::uint32_t c_in, std::uint32_t h,
                                             std::uint32_t w, std::uint32_t k,
                                             std::uint32_t r, std::uint32_t s) {
  if (c_in == 0 || h == 0 || w == 0 || k == 0 || r % 2 == 0 || s % 2 == 0 ||
      input.size() != static_cast<std::size_t>(c_in) * h * w ||
      weights.size() != static_cast<std::size_t>(k) * c_in * r * s) {
    fail(ErrorCode::BadDims, "conv oracle operand shapes");
  }
  std::vector<std::int32_t> out(static_cast<std::size_t>(k) * h * w);
  const int pr = static_cast<int>(r) / 2;
  const int ps = static_cast<int>(s) / 2;
  for (std::uint32_t oc = 0; oc < k; ++oc) {
    for (std::uint32_t y = 0; y < h; ++y) {
      for (std::uint32_t x = 0; x < w; ++x) {
        std::int64_t acc = 0;
        for (std::uint32_t ic = 0; ic < c_in; ++ic) {
          for (std::uint32_t dy = 0; dy < r; ++dy) {
            const int iy = static_cast<int>(y) + static_cast<int>(dy) - pr;
            if (iy < 0 || iy >= static_cast<int>(h)) continue;
            for (std::uint32_t dx = 0; dx < s; ++dx) {
              const int ix = static_cast<int>(x) + static_cast<int>(dx) - ps;
              if (ix < 0 || ix >= static_cast<int>(w)) continue;
              acc += static_cast<std::int64_t>(
                         input[(static_cast<std::size_t>(ic) * h + iy) * w + ix]) *
                     weights[((static_cast<std::size_t>(oc) * c_in + ic) * r + dy) * s +
                             dx];
            }
          }
        }
        out[(static_cast<std::size_t>(oc) * h + y) * w + x] =
            static_cast<std::int32_t>(acc);
      }
    }
  }
  return out;
}

MatmulPlan MatmulPlan::make(std::uint32_t size, std::uint32_t node_count,
                            const MatmulOptions& opt) {
  if (size < 2 || size % 2 != 0) {
    fail(ErrorCode::BadDims, "matrix size must be even and at least 2");
  }
  if (node_count != 1 && node_count != 2) {
    fail(ErrorCode::BadCommand, "matmul decomposition targets 1 or 2 nodes");
  }
  MatmulPlan plan;
  plan.size = size;
  plan.node_count = node_count;
  const std::uint64_t half = size / 2;
  const std::uint64_t col_block = static_cast<std::uint64_t>(size) * half * 4;
  const std::uint64_t quad_block = half * half * 4;
  plan.chunk_elems = opt.use_art
                         ? std::min<std::uint64_t>(opt.art_chunk_elems, size * half)
                         : static_cast<std::uint64_t>(size) * half;
  plan.staging_slots = opt.use_art ? 8 : 1;
  const std::uint64_t staging_bytes = plan.chunk_elems * 4 * plan.staging_slots;

  std::uint64_t per_node_cursor[2] = {0, 0};
  for (std::uint32_t v = 0; v < 2; ++v) {
    const NodeId node = plan.node_of(v);
    std::uint64_t& at = per_node_cursor[node];
    Slot& s = plan.slots[v];
    s.m_off = at;
    at = align_up(at + col_block);
    s.n_own_off = at;
    at = align_up(at + quad_block);
    s.n_other_off = at;
    at = align_up(at + quad_block);
    s.c_off = at;
    at = align_up(at + col_block);
    s.p2_off = at;
    at = align_up(at + col_block);
    s.staging_off = at;
    at = align_up(at + staging_bytes);
  }
  plan.shared_bytes_needed = std::max(per_node_cursor[0], per_node_cursor[1]);
  return plan;
}

WorkloadRun run_parallel_matmul(Runtime& rt, std::uint32_t size,
                                const MatmulOptions& opt) {
  const std::uint32_t vnodes = 2;
  const MatmulPlan plan = MatmulPlan::make(size, rt.node_count(), opt);
  ensure_fits(rt, plan.shared_bytes_needed);
  register_accum(rt);

  const std::uint32_t half = size / 2;
  const auto m_full = random_i32(static_cast<std::size_t>(size) * size, opt.seed);
  const auto n_full = random_i32(static_cast<std::size_t>(size) * size, opt.seed + 1);

  for (std::uint32_t v = 0; v < vnodes; ++v) {
    NodeMemory& mem = rt.memory(plan.node_of(v));
    const MatmulPlan::Slot& s = plan.slots[v];
    write_i32(mem, s.m_off, block_of(m_full, size, 0, v * half, size, half));
    write_i32(mem, s.n_own_off, block_of(n_full, size, v * half, v * half, half, half));
    write_i32(mem, s.n_other_off,
              block_of(n_full, size, v * half, (1 - v) * half, half, half));
    zero_range(mem, s.c_off, static_cast<std::uint64_t>(size) * half * 4);
    zero_range(mem, s.p2_off, static_cast<std::uint64_t>(size) * half * 4);
  }

  const std::uint64_t t0 = rt.now();

  // Iteration 1: partials destined for the local column block.
  std::vector<Handle> iter1;
  for (std::uint32_t v = 0; v < vnodes; ++v) {
    const MatmulPlan::Slot& s = plan.slots[v];
    ComputeCommand cmd;
    cmd.op = MatMulDesc{size, half, half, s.m_off, s.n_own_off, s.c_off, false};
    iter1.push_back(rt.enqueue_compute(plan.node_of(v), cmd));
  }

  // Iteration 2: remote-destined partials, streamed into the peer's
  // accumulate handler while the multiply runs.
  std::vector<Handle> iter2;
  for (std::uint32_t v = 0; v < vnodes; ++v) {
    const MatmulPlan::Slot& s = plan.slots[v];
    const std::uint32_t peer_v = 1 - v;
    const MatmulPlan::Slot& peer = plan.slots[peer_v];
    ComputeCommand cmd;
    cmd.op = MatMulDesc{size, half, half, s.m_off, s.n_other_off, s.p2_off, false};
    ArtConfig art;
    art.every_n_results = plan.chunk_elems;
    art.dest_node = plan.node_of(peer_v);
    art.dest_offset = peer.c_off;
    art.element_size = 4;
    art.opcode = kOpAccum;
    art.staging_offset = peer.staging_off;
    art.staging_slots = plan.staging_slots;
    cmd.art = art;
    iter2.push_back(rt.enqueue_compute(plan.node_of(v), cmd));
  }

  for (Handle h : iter1) rt.wait(h);
  for (Handle h : iter2) rt.wait(h);
  rt.barrier();

  const std::uint64_t elapsed = rt.now() - t0;

  // Distributed result: column block v on node_of(v); reference from the
  // serial oracle.
  const auto expect = serial_matmul_oracle(m_full, n_full, size, size, size);
  bool ok = true;
  for (std::uint32_t v = 0; v < vnodes && ok; ++v) {
    const auto got = read_i32(rt.memory(plan.node_of(v)), plan.slots[v].c_off,
                              static_cast<std::size_t>(size) * half);
    const auto want = block_of(expect, size, 0, v * half, size, half);
    ok = got == want;
  }

  WorkloadRun run;
  run.cycles = elapsed;
  run.seconds = rt.cycles_to_us(elapsed) * 1e-6;
  run.gops = run.seconds > 0
                 ? 2.0 * size * static_cast<double>(size) * size / run.seconds / 1e9
                 : 0.0;
  run.verified = ok;
  return run;
}

const std::vector<ConvPreset>& conv_presets() {
  static const std::vector<ConvPreset> presets = {
      {"k256r3", 256, 3, 256},
      {"k192r5", 192, 5, 192},
      {"k128r7", 128, 7, 128},
  };
  return presets;
}

const ConvPreset* find_conv_preset(const std::string& name) {
  for (const auto& p : conv_presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

ConvPlan ConvPlan::make(const ConvPreset& preset, const ConvOptions& opt,
                        std::uint32_t node_count) {
  if (node_count != 1 && node_count != 2) {
    fail(ErrorCode::BadCommand, "conv decomposition targets 1 or 2 nodes");
  }
  if (preset.kernels % node_count != 0) {
    fail(ErrorCode::BadDims, "kernel count must split evenly across nodes");
  }
  ConvPlan plan;
  plan.c_in = preset.c_in;
  plan.h = opt.height;
  plan.w = opt.width;
  plan.k = preset.kernels;
  plan.r = preset.kernel_dim;
  plan.node_count = node_count;

  const std::uint64_t in_bytes = 4ull * plan.c_in * plan.h * plan.w;
  const std::uint64_t w_bytes =
      4ull * plan.kernels_per_node() * plan.c_in * plan.r * plan.r;
  const std::uint64_t out_bytes = 4ull * plan.k * plan.h * plan.w;
  plan.in_off = 0;
  plan.w_off = align_up(in_bytes);
  plan.out_off = align_up(plan.w_off + w_bytes);
  plan.shared_bytes_needed = plan.out_off + out_bytes;
  return plan;
}

WorkloadRun run_parallel_conv(Runtime& rt, const ConvPreset& preset,
                              const ConvOptions& opt) {
  const std::uint32_t nodes = rt.node_count();
  const ConvPlan plan = ConvPlan::make(preset, opt, nodes);
  ensure_fits(rt, plan.shared_bytes_needed);

  const auto input = random_i32(static_cast<std::size_t>(plan.c_in) * plan.h * plan.w,
                                opt.seed);
  const auto weights = random_i32(
      static_cast<std::size_t>(plan.k) * plan.c_in * plan.r * plan.r, opt.seed + 1);

  const std::uint32_t k_local = plan.kernels_per_node();
  const std::uint64_t group_w = 4ull * k_local * plan.c_in * plan.r * plan.r;
  const std::uint64_t half_out = 4ull * k_local * plan.h * plan.w;

  for (std::uint32_t n = 0; n < nodes; ++n) {
    NodeMemory& mem = rt.memory(static_cast<NodeId>(n));
    write_i32(mem, plan.in_off, input);
    write_i32(mem, plan.w_off,
              std::span(weights).subspan(static_cast<std::size_t>(n) * group_w / 4,
                                         group_w / 4));
    zero_range(mem, plan.out_off, 4ull * plan.k * plan.h * plan.w);
  }

  const std::uint64_t t0 = rt.now();

  std::vector<Handle> handles;
  for (std::uint32_t n = 0; n < nodes; ++n) {
    const std::uint64_t own_out = plan.out_off + n * half_out;
    ComputeCommand cmd;
    cmd.op = Conv2dDesc{plan.c_in, plan.h,     plan.w, k_local,
                        plan.r,    plan.r,     plan.in_off,
                        plan.w_off, own_out};
    if (nodes == 2) {
      // Stream finished output channels to the same offsets on the peer.
      ArtConfig art;
      art.every_n_results =
          opt.use_art ? opt.art_chunk_elems
                      : static_cast<std::uint64_t>(k_local) * plan.h * plan.w;
      art.dest_node = static_cast<NodeId>(1 - n);
      art.dest_offset = own_out;
      art.element_size = 4;
      art.opcode = kOpPut;
      cmd.art = art;
    }
    handles.push_back(rt.enqueue_compute(static_cast<NodeId>(n), cmd));
  }

  for (Handle h : handles) rt.wait(h);
  rt.barrier();

  const std::uint64_t elapsed = rt.now() - t0;

  const auto expect = serial_conv_oracle(input, weights, plan.c_in, plan.h, plan.w,
                                         plan.k, plan.r, plan.r);
  bool ok = true;
  for (std::uint32_t n = 0; n < nodes && ok; ++n) {
    const auto got = read_i32(rt.memory(static_cast<NodeId>(n)), plan.out_off,
                              static_cast<std::size_t>(plan.k) * plan.h * plan.w);
    ok = got == expect;
  }

  const double macs = static_cast<double>(plan.k) * plan.c_in * plan.r * plan.r *
                      plan.h * plan.w;
  WorkloadRun run;
  run.cycles = elapsed;
  run.seconds = rt.cycles_to_us(elapsed) * 1e-6;
  run.gops = run.seconds > 0 ? 2.0 * macs / run.seconds / 1e9 : 0.0;
  run.verified = ok;
  return run;
}

}  // namespace pgasim
