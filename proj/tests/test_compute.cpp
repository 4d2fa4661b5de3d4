#include <doctest.h>

#include <cstring>
#include <numeric>
#include <random>

#include "pgasim/api.hpp"
#include "pgasim/compute.hpp"
#include "pgasim/workloads.hpp"

using namespace pgasim;

namespace {

JobConfig compute_job(std::uint32_t nodes = 1) {
  JobConfig cfg;
  cfg.node_count = nodes;
  cfg.segment = {8ull << 20, 1ull << 20};
  return cfg;
}

void write_i32(NodeMemory& mem, std::uint64_t off, std::span<const std::int32_t> v) {
  mem.dma_write(Region::Shared, off,
                {reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * 4});
}

std::vector<std::int32_t> read_i32(NodeMemory& mem, std::uint64_t off, std::size_t n) {
  std::vector<std::int32_t> out(n);
  const auto raw = mem.dma_read(Region::Shared, off, n * 4);
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

}  // namespace

TEST_CASE("model cycles follow ceil(MACs / array rate) + drain") {
  DlaConfig dla;
  dla.drain_overhead_cycles = 512;
  CHECK(dla.macs_per_cycle() == 2048);
  CHECK(dla.peak_gops() == doctest::Approx(1024.0));

  ComputeCommand mm;
  mm.op = MatMulDesc{1024, 1024, 1024, 0, 0, 0, false};
  CHECK(compute_macs(mm) == (1ull << 30));
  CHECK(model_cycles(mm, dla) == 524800);

  ComputeCommand cv;
  cv.op = Conv2dDesc{256, 64, 64, 256, 3, 3, 0, 0, 0};
  CHECK(compute_macs(cv) == 256ull * 256 * 9 * 64 * 64);
}

TEST_CASE("identity matmul leaves the operand unchanged") {
  std::mt19937 rng(5);
  std::int32_t a[4], eye[4] = {1, 0, 0, 1}, c[4];
  for (auto& v : a) v = static_cast<std::int32_t>(rng() % 255) - 127;
  matmul_i32(eye, a, c, 2, 2, 2, false);
  CHECK(std::equal(c, c + 4, a));
}

TEST_CASE("matmul kernel matches the naive oracle on random 8x8x8 blocks") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_i32(64, 100 + trial);
    const auto b = random_i32(64, 200 + trial);
    std::vector<std::int32_t> c(64);
    matmul_i32(a.data(), b.data(), c.data(), 8, 8, 8, false);
    CHECK(c == serial_matmul_oracle(a, b, 8, 8, 8));
  }
}

TEST_CASE("accumulating matmul adds onto the previous contents") {
  const auto a = random_i32(16, 1);
  const auto b = random_i32(16, 2);
  std::vector<std::int32_t> c(16, 0);
  matmul_i32(a.data(), b.data(), c.data(), 4, 4, 4, false);
  const auto once = c;
  matmul_i32(a.data(), b.data(), c.data(), 4, 4, 4, true);
  for (int i = 0; i < 16; ++i) CHECK(c[i] == 2 * once[i]);
}

TEST_CASE("1x1 unit kernel convolution is the identity") {
  const auto input = random_i32(64, 3);
  const std::vector<std::int32_t> w{1};
  std::vector<std::int32_t> out(64);
  conv2d_i32(input.data(), w.data(), out.data(), 1, 8, 8, 1, 1, 1);
  CHECK(out == input);
}

TEST_CASE("conv kernel matches the direct oracle on random shapes") {
  const std::uint32_t c_in = 4, h = 8, w = 8, k = 4, r = 3;
  const auto input = random_i32(static_cast<std::size_t>(c_in) * h * w, 7);
  const auto weights = random_i32(static_cast<std::size_t>(k) * c_in * r * r, 8);
  std::vector<std::int32_t> out(static_cast<std::size_t>(k) * h * w);
  conv2d_i32(input.data(), weights.data(), out.data(), c_in, h, w, k, r, r);
  CHECK(out == serial_conv_oracle(input, weights, c_in, h, w, k, r, r));
}

TEST_CASE("bad dims and out-of-segment operands are rejected at enqueue") {
  Runtime rt = Runtime::init(compute_job());
  rt.attach();
  ComputeCommand zero;
  zero.op = MatMulDesc{0, 4, 4, 0, 0, 0, false};
  CHECK_THROWS_AS((void)rt.enqueue_compute(0, zero), Error);

  ComputeCommand big;
  big.op = MatMulDesc{4096, 4096, 4096, 0, 0, 0, false};
  try {
    (void)rt.enqueue_compute(0, big);
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBounds);
  }
}

TEST_CASE("compute commands run in FIFO order and write the ack flag") {
  Runtime rt = Runtime::init(compute_job());
  rt.attach();
  const auto a = random_i32(16, 11);
  const auto eye = [] {
    std::vector<std::int32_t> m(16, 0);
    for (int i = 0; i < 4; ++i) m[i * 4 + i] = 1;
    return m;
  }();
  write_i32(rt.memory(0), 0, a);
  write_i32(rt.memory(0), 64, eye);

  ComputeCommand first;
  first.op = MatMulDesc{4, 4, 4, 0, 64, 128, false};
  first.ack_offset = 0;
  ComputeCommand second;  // reads the first result
  second.op = MatMulDesc{4, 4, 4, 128, 64, 192, false};
  second.ack_offset = 8;

  const Handle h1 = rt.enqueue_compute(0, first);
  const Handle h2 = rt.enqueue_compute(0, second);
  CHECK(rt.poll(h1) == HandleState::Pending);
  rt.wait(h2);
  CHECK(rt.poll(h1) == HandleState::Done);
  CHECK(read_i32(rt.memory(0), 192, 16) == a);
  CHECK(rt.memory(0).dma_read(Region::Private, 0, 1)[0] == 1);
  CHECK(rt.memory(0).dma_read(Region::Private, 8, 1)[0] == 1);
  CHECK(rt.fabric().completion_time(h2) > rt.fabric().completion_time(h1));
}

TEST_CASE("art chunk schedule: counts, sizes and emission points") {
  auto chunks = art_chunks(1024, 256, 10000);
  REQUIRE(chunks.size() == 4);
  for (const auto& c : chunks) CHECK(c.elem_count == 256);
  CHECK(chunks.back().emit_cycle == 10000);

  chunks = art_chunks(1000, 256, 8000);
  REQUIRE(chunks.size() == 4);
  CHECK(chunks[3].elem_count == 232);
  std::uint64_t total = 0;
  for (const auto& c : chunks) {
    total += c.elem_count;
    CHECK(c.emit_cycle <= 8000);
    // never before its last element exists under uniform production
    CHECK(c.emit_cycle * 1000 >= 8000 * (c.first_elem + c.elem_count));
  }
  CHECK(total == 1000);
}

TEST_CASE("art streams all result bytes as puts, chunk count ceil(results/N)") {
  Runtime rt = Runtime::init(compute_job(2));
  rt.attach();
  const std::uint32_t dim = 32;  // 1024 results
  const auto a = random_i32(static_cast<std::size_t>(dim) * dim, 21);
  const auto b = random_i32(static_cast<std::size_t>(dim) * dim, 22);
  write_i32(rt.memory(0), 0, a);
  write_i32(rt.memory(0), 8192, b);

  ComputeCommand cmd;
  cmd.op = MatMulDesc{dim, dim, dim, 0, 8192, 16384, false};
  ArtConfig art;
  art.every_n_results = 300;
  art.dest_node = 1;
  art.dest_offset = 0x40000;
  cmd.art = art;
  const Handle h = rt.enqueue_compute(0, cmd);
  rt.wait(h);
  rt.run_until_idle();

  CHECK(rt.fabric().art_chunks_emitted() == (1024 + 299) / 300);
  CHECK(rt.fabric().art_payload_bytes() == 1024 * 4);
  // destination offsets advanced contiguously: remote copy equals the result
  CHECK(read_i32(rt.memory(1), 0x40000, 1024) ==
        read_i32(rt.memory(0), 16384, 1024));
  CHECK(rt.fabric().protocol_errors().empty());
}

TEST_CASE("ART retries under queue backpressure without losing chunks") {
  JobConfig cfg = compute_job(2);
  cfg.core.queue_depth = 2;             // tiny FIFO
  cfg.link.min_packet_period_cycles = 4000;  // slow drain
  cfg.dla.drain_overhead_cycles = 16;   // chunks emitted almost at once
  Runtime rt = Runtime::init(cfg);
  rt.attach();
  const std::uint32_t dim = 64;
  const auto a = random_i32(static_cast<std::size_t>(dim) * dim, 71);
  const auto b = random_i32(static_cast<std::size_t>(dim) * dim, 72);
  write_i32(rt.memory(0), 0, a);
  write_i32(rt.memory(0), 65536, b);
  ComputeCommand cmd;
  cmd.op = MatMulDesc{dim, dim, dim, 0, 65536, 131072, false};
  ArtConfig art;
  art.every_n_results = 128;  // 32 chunks through a depth-2 queue
  art.dest_node = 1;
  art.dest_offset = 0;
  cmd.art = art;
  rt.wait(rt.enqueue_compute(0, cmd));
  rt.run_until_idle();
  CHECK(rt.fabric().art_chunks_emitted() == 32);
  CHECK(read_i32(rt.memory(1), 0, static_cast<std::size_t>(dim) * dim) ==
        read_i32(rt.memory(0), 131072, static_cast<std::size_t>(dim) * dim));
  CHECK(rt.fabric().protocol_errors().empty());
}

TEST_CASE("functional results are independent of ART and timing parameters") {
  auto run_with = [](bool use_art, std::uint64_t drain) {
    JobConfig cfg = compute_job(2);
    cfg.dla.drain_overhead_cycles = drain;
    Runtime rt = Runtime::init(cfg);
    rt.attach();
    const auto a = random_i32(1024, 31);
    const auto b = random_i32(1024, 32);
    write_i32(rt.memory(0), 0, a);
    write_i32(rt.memory(0), 4096, b);
    ComputeCommand cmd;
    cmd.op = MatMulDesc{32, 32, 32, 0, 4096, 8192, false};
    if (use_art) {
      ArtConfig art;
      art.every_n_results = 100;
      art.dest_node = 1;
      art.dest_offset = 0;
      cmd.art = art;
    }
    rt.wait(rt.enqueue_compute(0, cmd));
    rt.run_until_idle();
    return read_i32(rt.memory(0), 8192, 1024);
  };
  const auto base = run_with(false, 512);
  CHECK(run_with(true, 512) == base);
  CHECK(run_with(true, 24000) == base);
  CHECK(run_with(false, 100000) == base);
}

TEST_CASE("art chunks are never emitted before their results exist") {
  JobConfig cfg = compute_job(2);
  cfg.trace = true;
  Runtime rt = Runtime::init(cfg);
  rt.attach();
  const std::uint32_t dim = 64;
  const auto a = random_i32(static_cast<std::size_t>(dim) * dim, 41);
  const auto b = random_i32(static_cast<std::size_t>(dim) * dim, 42);
  write_i32(rt.memory(0), 0, a);
  write_i32(rt.memory(0), 65536, b);
  ComputeCommand cmd;
  cmd.op = MatMulDesc{dim, dim, dim, 0, 65536, 131072, false};
  ArtConfig art;
  art.every_n_results = 500;
  art.dest_node = 1;
  art.dest_offset = 0;
  cmd.art = art;
  rt.wait(rt.enqueue_compute(0, cmd));
  rt.run_until_idle();

  const std::uint64_t total_cycles = model_cycles(cmd, cfg.dla);
  const std::uint64_t results = dim * dim;
  std::uint64_t start = 0;
  std::uint64_t seen = 0;
  for (const auto& e : rt.fabric().trace().events()) {
    if (e.kind == TraceKind::ComputeStart) start = e.time;
    if (e.kind == TraceKind::ArtChunkEmitted) {
      seen += e.size / 4;
      // emission time >= proportional production time of its last element
      const std::uint64_t needed = (total_cycles * seen + results - 1) / results;
      CHECK(e.time - start >= needed);
    }
  }
  CHECK(seen == results);
}

TEST_CASE("compute args codec round-trips all command kinds") {
  ComputeCommand mm;
  mm.op = MatMulDesc{8, 16, 24, 64, 128, 256, true};
  auto enc = encode_compute_args(mm);
  auto dec = decode_compute_args({enc.args.data(), enc.count});
  const auto& m = std::get<MatMulDesc>(dec.op);
  CHECK(m.m == 8);
  CHECK(m.k == 16);
  CHECK(m.n == 24);
  CHECK(m.a_offset == 64);
  CHECK(m.accumulate);

  ComputeCommand cv;
  cv.op = Conv2dDesc{3, 8, 8, 2, 3, 3, 0, 1024, 2048};
  enc = encode_compute_args(cv);
  dec = decode_compute_args({enc.args.data(), enc.count});
  const auto& c = std::get<Conv2dDesc>(dec.op);
  CHECK(c.c_in == 3);
  CHECK(c.out_offset == 2048);

  ComputeCommand ac;
  ac.op = AccumulateDesc{512, 1024, 128};
  enc = encode_compute_args(ac);
  dec = decode_compute_args({enc.args.data(), enc.count});
  CHECK(std::get<AccumulateDesc>(dec.op).elem_count == 128);
}

TEST_CASE("accumulate command adds a staged range into the destination") {
  Runtime rt = Runtime::init(compute_job());
  rt.attach();
  const auto x = random_i32(128, 51);
  const auto y = random_i32(128, 52);
  write_i32(rt.memory(0), 0, x);
  write_i32(rt.memory(0), 512, y);
  ComputeCommand cmd;
  cmd.op = AccumulateDesc{0, 512, 128};
  rt.wait(rt.enqueue_compute(0, cmd));
  const auto got = read_i32(rt.memory(0), 0, 128);
  for (int i = 0; i < 128; ++i) CHECK(got[i] == x[i] + y[i]);
}

TEST_CASE("a COMPUTE active message drives the remote compute engine") {
  Runtime rt = Runtime::init(compute_job(2));
  rt.attach();
  const auto a = random_i32(16, 61);
  const auto b = random_i32(16, 62);
  write_i32(rt.memory(1), 0, a);
  write_i32(rt.memory(1), 64, b);
  ComputeCommand cmd;
  cmd.op = MatMulDesc{4, 4, 4, 0, 64, 128, false};
  const auto enc = encode_compute_args(cmd);
  rt.am_request_short(0, 1, kOpCompute, std::span(enc.args.data(), enc.count));
  rt.run_until_idle();
  CHECK(read_i32(rt.memory(1), 128, 16) == serial_matmul_oracle(a, b, 4, 4, 4));
}
