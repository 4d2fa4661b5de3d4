#include <benchmark/benchmark.h>

#include "pgasim/api.hpp"
#include "pgasim/compute.hpp"
#include "pgasim/wire.hpp"
#include "pgasim/workloads.hpp"

namespace {

using namespace pgasim;

MessageHeader long_header(std::uint32_t payload_len) {
  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Long;
  h.opcode = kOpPut;
  h.src = 0;
  h.dst = 1;
  h.payload_len = payload_len;
  h.dest_offset = 0x1000;
  h.token = 42;
  return h;
}

void BM_EncodeDecode(benchmark::State& state) {
  const std::uint32_t len = static_cast<std::uint32_t>(state.range(0));
  const Bytes payload(len, 0x5a);
  const MessageHeader h = long_header(len);
  for (auto _ : state) {
    auto img = encode_message(h, payload);
    auto out = decode_message(img);
    benchmark::DoNotOptimize(out);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_EncodeDecode)->Arg(64)->Arg(4096)->Arg(1 << 20);

void BM_PacketizeReassemble(benchmark::State& state) {
  const std::uint32_t len = static_cast<std::uint32_t>(state.range(0));
  const Bytes msg = encode_message(long_header(len), Bytes(len, 0x17));
  for (auto _ : state) {
    auto packets = packetize(msg, 512, 7);
    auto bytes = reassemble(packets);
    benchmark::DoNotOptimize(bytes);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_PacketizeReassemble)->Arg(4096)->Arg(1 << 20);

void BM_SimPut(benchmark::State& state) {
  const std::uint64_t len = static_cast<std::uint64_t>(state.range(0));
  JobConfig cfg;
  cfg.node_count = 2;
  cfg.segment = {8ull << 20, 1ull << 20};
  cfg.packet_size = 512;
  Runtime rt = Runtime::init(cfg);
  rt.attach();
  for (auto _ : state) {
    rt.put(0, {1, 0}, {Region::Shared, 0, len});
    rt.run_until_idle();
    benchmark::DoNotOptimize(rt.now());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SimPut)->Arg(4096)->Arg(1 << 20)->Unit(benchmark::kMicrosecond);

void BM_MatmulKernel(benchmark::State& state) {
  const std::uint32_t dim = static_cast<std::uint32_t>(state.range(0));
  const auto a = random_i32(static_cast<std::size_t>(dim) * dim, 1);
  const auto b = random_i32(static_cast<std::size_t>(dim) * dim, 2);
  std::vector<std::int32_t> c(static_cast<std::size_t>(dim) * dim);
  for (auto _ : state) {
    matmul_i32(a.data(), b.data(), c.data(), dim, dim, dim, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dim) * dim *
                          dim);
}
BENCHMARK(BM_MatmulKernel)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
