#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgasim/bench.hpp"
#include "pgasim/config.hpp"
#include "pgasim/socket_transport.hpp"
#include "pgasim/workloads.hpp"

namespace {

using namespace pgasim;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string transport = "sim";
  std::uint32_t nodes = 2;
  std::uint32_t packet_size = 0;  // 0: command-specific default
  bool nodes_set = false;
  bool packet_set = false;
};

JobConfig resolve_job(const CommonOpts& opts) {
  JobConfig cfg = bench_job_config();
  if (!opts.config_path.empty()) cfg = load_config_file(opts.config_path, cfg);
  if (opts.nodes_set) cfg.node_count = opts.nodes;
  if (opts.packet_set) cfg.packet_size = opts.packet_size;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out_path, "CSV output path");
  cmd->add_option("--nodes", opts.nodes, "number of nodes")
      ->check(CLI::PositiveNumber)
      ->trigger_on_parse()
      ->each([&](const std::string&) { opts.nodes_set = true; });
  cmd->add_option("--packet-size", opts.packet_size, "link packet size in bytes")
      ->check(CLI::IsMember({128, 256, 512, 1024}))
      ->each([&](const std::string&) { opts.packet_set = true; });
  cmd->add_option("--transport", opts.transport, "sim or socket")
      ->check(CLI::IsMember({"sim", "socket"}));
}

void print_rows(const std::vector<BenchRow>& rows) {
  std::printf("%-4s %-12s %-14s %-16s %-12s\n", "op", "packet_size", "transfer_size",
              "bandwidth_mbs", "latency_us");
  for (const auto& r : rows) {
    std::printf("%-4s %-12u %-14" PRIu64 " %-16.3f %-12.3f\n", to_string(r.op),
                r.packet_size, r.transfer_size, r.bandwidth_mbs, r.latency_us);
  }
}

int check_bw_invariants(const std::vector<BenchRow>& rows, double peak_mbs) {
  for (const auto& r : rows) {
    if (r.bandwidth_mbs > peak_mbs) {
      std::fprintf(stderr, "error: %s row at %" PRIu64 " B exceeds the %.0f MB/s peak\n",
                   to_string(r.op), r.transfer_size, peak_mbs);
      return kExitRuntime;
    }
  }
  return kExitOk;
}

int run_bench_bw(const CommonOpts& opts) {
  const JobConfig cfg = resolve_job(opts);
  if (cfg.node_count != 2) {
    std::fprintf(stderr, "error: bandwidth benchmarks need a 2-node job\n");
    return kExitUsage;
  }
  std::vector<std::uint32_t> packets = default_packet_sizes();
  if (opts.packet_set) packets = {opts.packet_size};
  const auto transfers = default_transfer_sizes();

  std::vector<BenchRow> rows;
  if (opts.transport == "socket") {
    std::fprintf(stderr,
                 "note: socket rows are wall-clock estimates; calibrated "
                 "numbers come from the sim transport\n");
    rows = bench_bandwidth_socket(BenchOp::Put, packets, transfers);
    const auto gets = bench_bandwidth_socket(BenchOp::Get, packets, transfers);
    rows.insert(rows.end(), gets.begin(), gets.end());
    print_rows(rows);
    if (!opts.out_path.empty()) emit_csv(rows, opts.out_path);
    return kExitOk;
  }

  rows = bench_bandwidth(cfg, BenchOp::Put, packets, transfers);
  const auto gets = bench_bandwidth(cfg, BenchOp::Get, packets, transfers);
  rows.insert(rows.end(), gets.begin(), gets.end());

  print_rows(rows);
  if (!opts.out_path.empty()) emit_csv(rows, opts.out_path);
  return check_bw_invariants(rows, cfg.link.peak_mbs());
}

int run_bench_lat(const CommonOpts& opts) {
  JobConfig cfg = resolve_job(opts);
  if (cfg.node_count != 2) {
    std::fprintf(stderr, "error: latency benchmarks need a 2-node job\n");
    return kExitUsage;
  }
  const std::uint32_t packet = opts.packet_set ? opts.packet_size : 1024;
  std::vector<std::uint64_t> payloads{0};  // short first
  for (std::uint64_t s : default_latency_payloads()) payloads.push_back(s);

  std::vector<BenchRow> rows;
  if (opts.transport == "socket") {
    std::fprintf(stderr,
                 "note: socket rows are wall-clock estimates; calibrated "
                 "numbers come from the sim transport\n");
    rows = bench_latency_socket(BenchOp::Put, payloads, packet);
    const auto sgets = bench_latency_socket(BenchOp::Get, payloads, packet);
    rows.insert(rows.end(), sgets.begin(), sgets.end());
    print_rows(rows);
    if (!opts.out_path.empty()) emit_csv(rows, opts.out_path);
    return kExitOk;
  }

  rows = bench_latency(cfg, BenchOp::Put, payloads, packet);
  const auto gets = bench_latency(cfg, BenchOp::Get, payloads, packet);
  rows.insert(rows.end(), gets.begin(), gets.end());
  print_rows(rows);

  double put_long = 0, get_long = 0;
  int longs = 0;
  for (const auto& r : rows) {
    if (r.transfer_size == 0) {
      std::printf("%s short-message latency: %.3f us\n", to_string(r.op), r.latency_us);
    } else if (r.op == BenchOp::Put) {
      put_long += r.latency_us;
      ++longs;
    } else {
      get_long += r.latency_us;
    }
  }
  std::printf("put long-message mean latency: %.3f us\n", put_long / longs);
  std::printf("get long-message mean latency: %.3f us\n", get_long / longs);

  if (!opts.out_path.empty()) emit_csv(rows, opts.out_path);
  return kExitOk;
}

WorkloadRun run_matmul_at(std::uint32_t nodes, const JobConfig& base,
                          std::uint32_t size) {
  JobConfig cfg = base;
  cfg.node_count = nodes;
  cfg.segment.shared_size = std::max<std::uint64_t>(cfg.segment.shared_size, 48ull << 20);
  Runtime rt = Runtime::init(cfg);
  rt.attach();
  return run_parallel_matmul(rt, size, {});
}

int run_app_matmul(const CommonOpts& opts, std::uint32_t size) {
  const JobConfig cfg = resolve_job(opts);
  if (opts.nodes_set && opts.nodes != 2) {
    std::fprintf(stderr, "error: the matmul case study runs on 2 nodes\n");
    return kExitUsage;
  }

  if (opts.transport == "socket") {
    std::fprintf(stderr,
                 "error: app subcommands model compute time and require the "
                 "sim transport\n");
    return kExitUsage;
  }

  const WorkloadRun one = run_matmul_at(1, cfg, size);
  const WorkloadRun two = run_matmul_at(2, cfg, size);
  const double speedup = one.seconds / two.seconds;
  std::printf("matmul %ux%u\n", size, size);
  std::printf("  1-node: %10.1f GOPS  (%.3f ms simulated)\n", one.gops,
              one.seconds * 1e3);
  std::printf("  2-node: %10.1f GOPS  (%.3f ms simulated)\n", two.gops,
              two.seconds * 1e3);
  std::printf("  speedup: %.3fx\n", speedup);
  std::printf("  results vs serial oracle: %s\n",
              one.verified && two.verified ? "match" : "MISMATCH");
  if (!one.verified || !two.verified) return kExitRuntime;
  return kExitOk;
}

int run_app_conv(const CommonOpts& opts, const std::string& preset_name) {
  const ConvPreset* preset = find_conv_preset(preset_name);
  if (!preset) {
    std::fprintf(stderr, "error: unknown preset '%s'\n", preset_name.c_str());
    return kExitUsage;
  }
  if (opts.transport == "socket") {
    std::fprintf(stderr,
                 "error: app subcommands model compute time and require the "
                 "sim transport\n");
    return kExitUsage;
  }
  const JobConfig base = resolve_job(opts);

  auto run_at = [&](std::uint32_t nodes) {
    JobConfig cfg = base;
    cfg.node_count = nodes;
    cfg.segment.shared_size =
        std::max<std::uint64_t>(cfg.segment.shared_size, 16ull << 20);
    Runtime rt = Runtime::init(cfg);
    rt.attach();
    return run_parallel_conv(rt, *preset, {});
  };
  const WorkloadRun one = run_at(1);
  const WorkloadRun two = run_at(2);
  const double speedup = one.seconds / two.seconds;
  std::printf("conv 64x64x%u, %u kernels %ux%ux%u\n", preset->c_in, preset->kernels,
              preset->kernel_dim, preset->kernel_dim, preset->c_in);
  std::printf("  1-node: %10.1f GOPS  (%.3f ms simulated)\n", one.gops,
              one.seconds * 1e3);
  std::printf("  2-node: %10.1f GOPS  (%.3f ms simulated)\n", two.gops,
              two.seconds * 1e3);
  std::printf("  speedup: %.3fx\n", speedup);
  std::printf("  results vs serial oracle: %s\n",
              one.verified && two.verified ? "match" : "MISMATCH");
  if (!one.verified || !two.verified) return kExitRuntime;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PGAS active-message runtime and link simulator"};
  app.require_subcommand(1);

  CommonOpts opts;

  CLI::App* bench = app.add_subcommand("bench", "bandwidth and latency benchmarks");
  bench->require_subcommand(1);
  CLI::App* bench_bw = bench->add_subcommand("bw", "put/get bandwidth sweep");
  CLI::App* bench_lat = bench->add_subcommand("lat", "put/get latency sweep");
  add_common(bench_bw, opts);
  add_common(bench_lat, opts);

  CLI::App* app_cmd = app.add_subcommand("app", "parallel case studies");
  app_cmd->require_subcommand(1);
  CLI::App* app_matmul = app_cmd->add_subcommand("matmul", "2-node blocked matmul");
  std::uint32_t matmul_size = 256;
  app_matmul->add_option("--size", matmul_size, "matrix dimension")
      ->check(CLI::IsMember({256, 512, 1024}));
  add_common(app_matmul, opts);

  CLI::App* app_conv = app_cmd->add_subcommand("conv", "2-node split-kernel conv");
  std::string preset = "k256r3";
  app_conv->add_option("--preset", preset, "kernel configuration")
      ->check(CLI::IsMember({"k256r3", "k192r5", "k128r7"}));
  add_common(app_conv, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (bench_bw->parsed()) return run_bench_bw(opts);
    if (bench_lat->parsed()) return run_bench_lat(opts);
    if (app_matmul->parsed()) return run_app_matmul(opts, matmul_size);
    if (app_conv->parsed()) return run_app_conv(opts, preset);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
