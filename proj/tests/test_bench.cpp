#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pgasim/bench.hpp"

using namespace pgasim;

TEST_CASE("default sweeps match the benchmark grid") {
  CHECK(default_packet_sizes() == std::vector<std::uint32_t>{128, 256, 512, 1024});
  const auto sizes = default_transfer_sizes();
  CHECK(sizes.front() == 4);
  CHECK(sizes.back() == 2 * 1024 * 1024);
  CHECK(sizes.size() == 20);
}

TEST_CASE("put bandwidth is monotone in transfer size and below the peak") {
  const std::uint32_t packets[] = {512};
  const auto rows = bench_bandwidth(bench_job_config(), BenchOp::Put, packets,
                                    default_transfer_sizes());
  REQUIRE(rows.size() == 20);
  double prev = 0.0;
  for (const auto& r : rows) {
    CHECK(r.bandwidth_mbs >= prev);
    CHECK(r.bandwidth_mbs <= 4000.0);
    prev = r.bandwidth_mbs;
  }
}

TEST_CASE("peak bandwidth is non-decreasing in packet size") {
  const auto packets = default_packet_sizes();
  const std::uint64_t sizes[] = {2 * 1024 * 1024};
  const auto rows = bench_bandwidth(bench_job_config(), BenchOp::Put, packets, sizes);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].bandwidth_mbs >= rows[i - 1].bandwidth_mbs);
  }
}

TEST_CASE("get trails put at 2 KiB and the gap closes at 2 MiB") {
  const std::uint32_t packets[] = {512};
  const std::uint64_t sizes[] = {2048, 2 * 1024 * 1024};
  const auto put = bench_bandwidth(bench_job_config(), BenchOp::Put, packets, sizes);
  const auto get = bench_bandwidth(bench_job_config(), BenchOp::Get, packets, sizes);
  CHECK(get[0].bandwidth_mbs < put[0].bandwidth_mbs);
  const double gap_small =
      (put[0].bandwidth_mbs - get[0].bandwidth_mbs) / put[0].bandwidth_mbs;
  const double gap_big =
      (put[1].bandwidth_mbs - get[1].bandwidth_mbs) / put[1].bandwidth_mbs;
  CHECK(gap_small > gap_big);
}

TEST_CASE("latency: get exceeds put at every payload size") {
  const std::uint64_t sizes[] = {0, 64, 4096, 262144};
  const auto put = bench_latency(bench_job_config(), BenchOp::Put, sizes, 1024);
  const auto get = bench_latency(bench_job_config(), BenchOp::Get, sizes, 1024);
  REQUIRE(put.size() == get.size());
  for (std::size_t i = 0; i < put.size(); ++i) {
    CHECK(get[i].latency_us > put[i].latency_us);
  }
}

TEST_CASE("csv output shape and determinism") {
  const std::uint32_t packets[] = {128, 512};
  const std::uint64_t sizes[] = {4096};
  auto rows = bench_bandwidth(bench_job_config(), BenchOp::Put, packets, sizes);
  const std::string a = csv_string(rows);
  const std::string b =
      csv_string(bench_bandwidth(bench_job_config(), BenchOp::Put, packets, sizes));
  CHECK(a == b);
  CHECK(a.rfind("op,packet_size,transfer_size,bandwidth_mbs,latency_us\n", 0) == 0);

  const BenchRow one = rows[0];
  const std::string single = csv_string({one});
  CHECK(std::count(single.begin(), single.end(), '\n') == 2);

  CHECK_THROWS_AS((void)csv_string({}), Error);
}

TEST_CASE("emit_csv writes the file and fails cleanly on bad paths") {
  const std::uint32_t packets[] = {512};
  const std::uint64_t sizes[] = {1024};
  const auto rows = bench_bandwidth(bench_job_config(), BenchOp::Put, packets, sizes);
  const auto path = std::filesystem::temp_directory_path() / "pgasim_bench_test.csv";
  emit_csv(rows, path.string());
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "op,packet_size,transfer_size,bandwidth_mbs,latency_us");
  std::filesystem::remove(path);

  CHECK_THROWS_AS(emit_csv(rows, "/nonexistent-dir/x.csv"), Error);
}
