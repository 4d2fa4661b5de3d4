#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgasim/api.hpp"

namespace pgasim {

enum class BenchOp { Put, Get };

const char* to_string(BenchOp op);

struct BenchRow {
  BenchOp op = BenchOp::Put;
  std::uint32_t packet_size = 0;
  std::uint64_t transfer_size = 0;
  double bandwidth_mbs = 0.0;  // 10^6 bytes per second of simulated time
  double latency_us = 0.0;

  bool operator==(const BenchRow&) const = default;
};

/// Packet sweep {128, 256, 512, 1024} and transfer sweep 4 B .. 2 MiB in
/// powers of two.
std::vector<std::uint32_t> default_packet_sizes();
std::vector<std::uint64_t> default_transfer_sizes();
std::vector<std::uint64_t> default_latency_payloads();

/// Base job configuration for a 2-node benchmark fabric.
JobConfig bench_job_config();

/// One-shot transfers between two nodes; bandwidth = transfer_size over the
/// span from command submission to the last payload byte written remotely
/// (put) or the last reply byte delivered (get).
std::vector<BenchRow> bench_bandwidth(const JobConfig& base, BenchOp op,
                                      std::span<const std::uint32_t> packet_sizes,
                                      std::span<const std::uint64_t> transfer_sizes);

/// Header-arrival latencies: put until the message header reaches the remote
/// node, get until the reply header returns. transfer_size 0 is the
/// no-payload short-message case.
std::vector<BenchRow> bench_latency(const JobConfig& base, BenchOp op,
                                    std::span<const std::uint64_t> payload_sizes,
                                    std::uint32_t packet_size);

std::string csv_string(const std::vector<BenchRow>& rows);
void emit_csv(const std::vector<BenchRow>& rows, const std::string& path);

/// Wall-clock variants over the stream-socket transport. Put rows time the
/// local injection of all frames; get rows time the full request/reply round
/// trip. Informational only; the calibrated numbers come from the simulator.
std::vector<BenchRow> bench_bandwidth_socket(BenchOp op,
                                             std::span<const std::uint32_t> packet_sizes,
                                             std::span<const std::uint64_t> transfer_sizes);
std::vector<BenchRow> bench_latency_socket(BenchOp op,
                                           std::span<const std::uint64_t> payload_sizes,
                                           std::uint32_t packet_size);

}  // namespace pgasim
