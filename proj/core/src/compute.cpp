#include "pgasim/compute.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace pgasim {

namespace {

struct OperandRange {
  std::uint64_t offset;
  std::uint64_t bytes;
};

void check_ranges(const NodeMemory& memory, std::initializer_list<OperandRange> ranges) {
  for (const auto& r : ranges) {
    if (r.offset % 4 != 0) {
      fail(ErrorCode::BadDims, "operand offset not 4-byte aligned");
    }
    const std::uint64_t limit = memory.shared_size();
    if (r.offset > limit || r.bytes > limit - r.offset) {
      fail(ErrorCode::OutOfBounds, "operand range exceeds the shared segment");
    }
  }
}

std::int32_t* shared_i32(NodeMemory& memory, std::uint64_t offset) {
  return reinterpret_cast<std::int32_t*>(memory.view(Region::Shared).data() + offset);
}

}  // namespace

std::uint64_t compute_macs(const ComputeCommand& cmd) {
  if (const auto* mm = std::get_if<MatMulDesc>(&cmd.op)) {
    return static_cast<std::uint64_t>(mm->m) * mm->k * mm->n;
  }
  if (const auto* cv = std::get_if<Conv2dDesc>(&cmd.op)) {
    return static_cast<std::uint64_t>(cv->k) * cv->c_in * cv->r * cv->s * cv->h * cv->w;
  }
  return std::get<AccumulateDesc>(cmd.op).elem_count;
}

std::uint64_t model_cycles(const ComputeCommand& cmd, const DlaConfig& dla) {
  const std::uint64_t per_cycle = dla.macs_per_cycle();
  const std::uint64_t macs = compute_macs(cmd);
  return (macs + per_cycle - 1) / per_cycle + dla.drain_overhead_cycles;
}

std::uint64_t result_count(const ComputeCommand& cmd) {
  if (const auto* mm = std::get_if<MatMulDesc>(&cmd.op)) {
    return static_cast<std::uint64_t>(mm->m) * mm->n;
  }
  if (const auto* cv = std::get_if<Conv2dDesc>(&cmd.op)) {
    return static_cast<std::uint64_t>(cv->k) * cv->h * cv->w;
  }
  return std::get<AccumulateDesc>(cmd.op).elem_count;
}

SourceDesc result_range(const ComputeCommand& cmd) {
  std::uint64_t offset = 0;
  if (const auto* mm = std::get_if<MatMulDesc>(&cmd.op)) {
    offset = mm->c_offset;
  } else if (const auto* cv = std::get_if<Conv2dDesc>(&cmd.op)) {
    offset = cv->out_offset;
  } else {
    offset = std::get<AccumulateDesc>(cmd.op).dst_offset;
  }
  return {Region::Shared, offset, result_count(cmd) * 4};
}

void validate_command(const ComputeCommand& cmd, const NodeMemory& memory) {
  if (const auto* mm = std::get_if<MatMulDesc>(&cmd.op)) {
    if (mm->m == 0 || mm->k == 0 || mm->n == 0) {
      fail(ErrorCode::BadDims, "matmul dims must be positive");
    }
    check_ranges(memory, {{mm->a_offset, 4ull * mm->m * mm->k},
                          {mm->b_offset, 4ull * mm->k * mm->n},
                          {mm->c_offset, 4ull * mm->m * mm->n}});
  } else if (const auto* cv = std::get_if<Conv2dDesc>(&cmd.op)) {
    if (cv->c_in == 0 || cv->h == 0 || cv->w == 0 || cv->k == 0 || cv->r == 0 ||
        cv->s == 0) {
      fail(ErrorCode::BadDims, "conv dims must be positive");
    }
    if (cv->r % 2 == 0 || cv->s % 2 == 0) {
      fail(ErrorCode::BadDims, "same-padding convolution needs odd kernel dims");
    }
    check_ranges(memory, {{cv->in_offset, 4ull * cv->c_in * cv->h * cv->w},
                          {cv->w_offset, 4ull * cv->k * cv->c_in * cv->r * cv->s},
                          {cv->out_offset, 4ull * cv->k * cv->h * cv->w}});
  } else {
    const auto& ac = std::get<AccumulateDesc>(cmd.op);
    check_ranges(memory,
                 {{ac.dst_offset, 4 * ac.elem_count}, {ac.src_offset, 4 * ac.elem_count}});
  }
  if (cmd.art && cmd.art->every_n_results == 0) {
    fail(ErrorCode::BadDims, "ART chunk size must be positive");
  }
}

void matmul_i32(const std::int32_t* a, const std::int32_t* b, std::int32_t* c,
                std::uint32_t m, std::uint32_t k, std::uint32_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(std::int32_t) * m * n);
  for (std::uint32_t i = 0; i < m; ++i) {
    const std::int32_t* arow = a + static_cast<std::size_t>(i) * k;
    std::int32_t* crow = c + static_cast<std::size_t>(i) * n;
    for (std::uint32_t l = 0; l < k; ++l) {
      const std::int32_t av = arow[l];
      if (av == 0) continue;
      const std::int32_t* brow = b + static_cast<std::size_t>(l) * n;
      for (std::uint32_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void conv2d_i32(const std::int32_t* in, const std::int32_t* w, std::int32_t* out,
                std::uint32_t c_in, std::uint32_t h, std::uint32_t width,
                std::uint32_t k, std::uint32_t r, std::uint32_t s) {
  const std::uint32_t pr = r / 2;
  const std::uint32_t ps = s / 2;
  std::memset(out, 0, sizeof(std::int32_t) * k * h * width);
  for (std::uint32_t oc = 0; oc < k; ++oc) {
    std::int32_t* oplane = out + static_cast<std::size_t>(oc) * h * width;
    for (std::uint32_t ic = 0; ic < c_in; ++ic) {
      const std::int32_t* iplane = in + static_cast<std::size_t>(ic) * h * width;
      const std::int32_t* wbase =
          w + ((static_cast<std::size_t>(oc) * c_in + ic) * r) * s;
      for (std::uint32_t dy = 0; dy < r; ++dy) {
        const std::int64_t sy = static_cast<std::int64_t>(dy) - pr;
        for (std::uint32_t dx = 0; dx < s; ++dx) {
          const std::int64_t sx = static_cast<std::int64_t>(dx) - ps;
          const std::int32_t wv = wbase[dy * s + dx];
          if (wv == 0) continue;
          const std::uint32_t y0 = static_cast<std::uint32_t>(std::max<std::int64_t>(0, -sy));
          const std::uint32_t y1 = static_cast<std::uint32_t>(
              std::min<std::int64_t>(h, static_cast<std::int64_t>(h) - sy));
          const std::uint32_t x0 = static_cast<std::uint32_t>(std::max<std::int64_t>(0, -sx));
          const std::uint32_t x1 = static_cast<std::uint32_t>(
              std::min<std::int64_t>(width, static_cast<std::int64_t>(width) - sx));
          for (std::uint32_t y = y0; y < y1; ++y) {
            std::int32_t* orow = oplane + static_cast<std::size_t>(y) * width;
            const std::int32_t* irow =
                iplane + static_cast<std::size_t>(y + sy) * width + sx;
            for (std::uint32_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

void run_functional(NodeMemory& memory, const ComputeCommand& cmd) {
  validate_command(cmd, memory);
  if (const auto* mm = std::get_if<MatMulDesc>(&cmd.op)) {
    matmul_i32(shared_i32(memory, mm->a_offset), shared_i32(memory, mm->b_offset),
               shared_i32(memory, mm->c_offset), mm->m, mm->k, mm->n, mm->accumulate);
  } else if (const auto* cv = std::get_if<Conv2dDesc>(&cmd.op)) {
    conv2d_i32(shared_i32(memory, cv->in_offset), shared_i32(memory, cv->w_offset),
               shared_i32(memory, cv->out_offset), cv->c_in, cv->h, cv->w, cv->k,
               cv->r, cv->s);
  } else {
    const auto& ac = std::get<AccumulateDesc>(cmd.op);
    const std::int32_t* src = shared_i32(memory, ac.src_offset);
    std::int32_t* dst = shared_i32(memory, ac.dst_offset);
    for (std::uint64_t i = 0; i < ac.elem_count; ++i) dst[i] += src[i];
  }
}

std::vector<ArtChunk> art_chunks(std::uint64_t results, std::uint64_t every_n,
                                 std::uint64_t total_cycles) {
  std::vector<ArtChunk> out;
  if (results == 0) return out;
  const std::uint64_t count = (results + every_n - 1) / every_n;
  out.reserve(count);
  for (std::uint64_t i = 1; i <= count; ++i) {
    const std::uint64_t end = std::min(i * every_n, results);
    const std::uint64_t first = (i - 1) * every_n;
    // A chunk is emittable once its last element exists; results appear at a
    // uniform rate across the compute window.
    const std::uint64_t emit =
        (total_cycles * end + results - 1) / results;
    out.push_back({first, end - first, emit});
  }
  return out;
}

EncodedComputeArgs encode_compute_args(const ComputeCommand& cmd) {
  EncodedComputeArgs enc;
  auto push = [&](std::uint64_t v) {
    enc.args[enc.count++] = static_cast<std::uint32_t>(v);
  };
  if (const auto* mm = std::get_if<MatMulDesc>(&cmd.op)) {
    push(0);
    push(mm->m);
    push(mm->k);
    push(mm->n);
    push(mm->a_offset);
    push(mm->b_offset);
    push(mm->c_offset);
    push(mm->accumulate ? 1 : 0);
  } else if (const auto* cv = std::get_if<Conv2dDesc>(&cmd.op)) {
    push(1);
    push(cv->c_in);
    push(cv->h);
    push(cv->w);
    push(cv->k);
    push(cv->r);
    push(cv->s);
    push(cv->in_offset);
    push(cv->w_offset);
    push(cv->out_offset);
  } else {
    const auto& ac = std::get<AccumulateDesc>(cmd.op);
    push(2);
    push(ac.dst_offset);
    push(ac.src_offset);
    push(ac.elem_count);
  }
  return enc;
}

ComputeCommand decode_compute_args(std::span<const std::uint32_t> args) {
  if (args.empty()) fail(ErrorCode::BadCommand, "empty compute args");
  ComputeCommand cmd;
  switch (args[0]) {
    case 0: {
      if (args.size() < 8) fail(ErrorCode::BadCommand, "short matmul args");
      MatMulDesc mm;
      mm.m = args[1];
      mm.k = args[2];
      mm.n = args[3];
      mm.a_offset = args[4];
      mm.b_offset = args[5];
      mm.c_offset = args[6];
      mm.accumulate = args[7] != 0;
      cmd.op = mm;
      break;
    }
    case 1: {
      if (args.size() < 10) fail(ErrorCode::BadCommand, "short conv args");
      Conv2dDesc cv;
      cv.c_in = args[1];
      cv.h = args[2];
      cv.w = args[3];
      cv.k = args[4];
      cv.r = args[5];
      cv.s = args[6];
      cv.in_offset = args[7];
      cv.w_offset = args[8];
      cv.out_offset = args[9];
      cmd.op = cv;
      break;
    }
    case 2: {
      if (args.size() < 4) fail(ErrorCode::BadCommand, "short accumulate args");
      AccumulateDesc ac;
      ac.dst_offset = args[1];
      ac.src_offset = args[2];
      ac.elem_count = args[3];
      cmd.op = ac;
      break;
    }
    default:
      fail(ErrorCode::BadCommand, "unknown compute kind tag");
  }
  return cmd;
}

}  // namespace pgasim
