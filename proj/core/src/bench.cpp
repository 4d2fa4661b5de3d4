#include "pgasim/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "pgasim/socket_transport.hpp"

namespace pgasim {

namespace {

constexpr std::uint64_t kSrcOffset = 0;
constexpr std::uint64_t kGetDest = 4ull << 20;

Bytes pattern_bytes(std::uint64_t len, std::uint64_t salt) {
  Bytes out(len);
  std::uint64_t x = salt * 0x9e3779b97f4a7c15ull + 1;
  for (std::uint64_t i = 0; i < len; ++i) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    out[i] = static_cast<std::uint8_t>(x);
  }
  return out;
}

Runtime fresh_runtime(const JobConfig& base, std::uint32_t packet_size) {
  JobConfig cfg = base;
  cfg.node_count = 2;
  cfg.packet_size = packet_size;
  cfg.trace = false;
  Runtime rt = Runtime::init(cfg);
  rt.attach();
  return rt;
}

struct Timing {
  std::uint64_t header_cycles;
  std::uint64_t done_cycles;
};

Timing measure_put(Runtime& rt, std::uint64_t len) {
  rt.memory(0).dma_write(Region::Shared, kSrcOffset, pattern_bytes(len, len));
  const std::uint64_t t0 = rt.now();
  const Handle h = rt.put(0, GlobalAddress{1, 0}, {Region::Shared, kSrcOffset, len});
  rt.run_until_idle();
  const DeliveryRecord* rec =
      rt.fabric().find_delivery(rt.fabric().handle_token(h), MessageKind::Request);
  if (!rec) fail(ErrorCode::LivelockGuard, "put was never delivered");
  return {rec->t_header - t0, rec->t_delivered - t0};
}

Timing measure_get(Runtime& rt, std::uint64_t len) {
  rt.memory(1).dma_write(Region::Shared, kSrcOffset, pattern_bytes(len, len + 17));
  const std::uint64_t t0 = rt.now();
  const Handle h = rt.get(0, GlobalAddress{1, 0}, len, Region::Shared, kGetDest);
  rt.wait(h);
  rt.run_until_idle();
  const DeliveryRecord* rec =
      rt.fabric().find_delivery(rt.fabric().handle_token(h), MessageKind::Reply);
  if (!rec) fail(ErrorCode::LivelockGuard, "get reply was never delivered");
  return {rec->t_header - t0, rec->t_delivered - t0};
}

}  // namespace

const char* to_string(BenchOp op) { return op == BenchOp::Put ? "put" : "get"; }

std::vector<std::uint32_t> default_packet_sizes() { return {128, 256, 512, 1024}; }

std::vector<std::uint64_t> default_transfer_sizes() {
  std::vector<std::uint64_t> sizes;
  for (std::uint64_t s = 4; s <= (2ull << 20); s *= 2) sizes.push_back(s);
  return sizes;
}

std::vector<std::uint64_t> default_latency_payloads() { return default_transfer_sizes(); }

JobConfig bench_job_config() {
  JobConfig cfg;
  cfg.node_count = 2;
  cfg.segment = {8ull << 20, 1ull << 20};
  return cfg;
}

std::vector<BenchRow> bench_bandwidth(const JobConfig& base, BenchOp op,
                                      std::span<const std::uint32_t> packet_sizes,
                                      std::span<const std::uint64_t> transfer_sizes) {
  std::vector<BenchRow> rows;
  for (std::uint32_t p : packet_sizes) {
    for (std::uint64_t n : transfer_sizes) {
      Runtime rt = fresh_runtime(base, p);
      const Timing t =
          op == BenchOp::Put ? measure_put(rt, n) : measure_get(rt, n);
      BenchRow row;
      row.op = op;
      row.packet_size = p;
      row.transfer_size = n;
      const double us = rt.cycles_to_us(t.done_cycles);
      row.bandwidth_mbs = us > 0 ? static_cast<double>(n) / us : 0.0;
      row.latency_us = rt.cycles_to_us(t.header_cycles);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<BenchRow> bench_latency(const JobConfig& base, BenchOp op,
                                    std::span<const std::uint64_t> payload_sizes,
                                    std::uint32_t packet_size) {
  std::vector<BenchRow> rows;
  for (std::uint64_t n : payload_sizes) {
    Runtime rt = fresh_runtime(base, packet_size);
    const Timing t = op == BenchOp::Put ? measure_put(rt, n) : measure_get(rt, n);
    BenchRow row;
    row.op = op;
    row.packet_size = packet_size;
    row.transfer_size = n;
    const double us = rt.cycles_to_us(t.done_cycles);
    row.bandwidth_mbs = us > 0 ? static_cast<double>(n) / us : 0.0;
    row.latency_us = rt.cycles_to_us(t.header_cycles);
    rows.push_back(row);
  }
  return rows;
}

std::string csv_string(const std::vector<BenchRow>& rows) {
  if (rows.empty()) fail(ErrorCode::IoError, "no benchmark rows to emit");
  std::vector<BenchRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](const BenchRow& a, const BenchRow& b) {
    if (a.op != b.op) return static_cast<int>(a.op) < static_cast<int>(b.op);
    if (a.packet_size != b.packet_size) return a.packet_size < b.packet_size;
    return a.transfer_size < b.transfer_size;
  });
  std::string out = "op,packet_size,transfer_size,bandwidth_mbs,latency_us\n";
  char line[160];
  for (const BenchRow& r : sorted) {
    std::snprintf(line, sizeof(line), "%s,%u,%llu,%.3f,%.3f\n", to_string(r.op),
                  r.packet_size, static_cast<unsigned long long>(r.transfer_size),
                  r.bandwidth_mbs, r.latency_us);
    out += line;
  }
  return out;
}

void emit_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  const std::string text = csv_string(rows);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path);
  f << text;
  if (!f) fail(ErrorCode::IoError, "write failed for " + path);
}

namespace {

double now_us() {
  return std::chrono::duration<double, std::micro>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

SocketConfig socket_bench_config(std::uint32_t packet_size) {
  SocketConfig cfg;
  cfg.node_count = 2;
  cfg.segment = {8ull << 20, 1ull << 20};
  cfg.packet_size = packet_size;
  return cfg;
}

}  // namespace

std::vector<BenchRow> bench_bandwidth_socket(
    BenchOp op, std::span<const std::uint32_t> packet_sizes,
    std::span<const std::uint64_t> transfer_sizes) {
  std::vector<BenchRow> rows;
  for (std::uint32_t p : packet_sizes) {
    SocketRuntime srt(socket_bench_config(p));
    std::vector<BenchRow> local;
    srt.run([&](SocketNode& node) {
      for (std::uint64_t n : transfer_sizes) {
        if (op == BenchOp::Put) {
          if (node.id() == 0) {
            node.memory().dma_write(Region::Shared, 0, pattern_bytes(n, n));
            const double t0 = now_us();
            node.put({1, 0}, {Region::Shared, 0, n});
            const double dt = now_us() - t0;
            local.push_back({op, p, n, dt > 0 ? n / dt : 0.0, dt});
          }
        } else {
          if (node.id() == 1) {
            node.memory().dma_write(Region::Shared, 0, pattern_bytes(n, n + 3));
          }
          node.barrier();
          if (node.id() == 0) {
            const double t0 = now_us();
            node.wait(node.get({1, 0}, n, Region::Shared, kGetDest));
            const double dt = now_us() - t0;
            local.push_back({op, p, n, dt > 0 ? n / dt : 0.0, dt});
          }
        }
        node.barrier();
      }
    });
    rows.insert(rows.end(), local.begin(), local.end());
  }
  return rows;
}

std::vector<BenchRow> bench_latency_socket(BenchOp op,
                                           std::span<const std::uint64_t> payload_sizes,
                                           std::uint32_t packet_size) {
  std::vector<std::uint64_t> sizes(payload_sizes.begin(), payload_sizes.end());
  return bench_bandwidth_socket(op, std::span(&packet_size, 1), sizes);
}

}  // namespace pgasim
