#include <doctest.h>

#include "pgasim/config.hpp"

using namespace pgasim;

TEST_CASE("empty object keeps the defaults") {
  const JobConfig cfg = parse_config_json("{}");
  const JobConfig def;
  CHECK(cfg.node_count == def.node_count);
  CHECK(cfg.packet_size == def.packet_size);
  CHECK(cfg.link.bytes_per_cycle == def.link.bytes_per_cycle);
  CHECK(cfg.dla.drain_overhead_cycles == def.dla.drain_overhead_cycles);
}

TEST_CASE("all documented keys parse") {
  const char* text = R"({
    "nodes": 2,
    "topology": "ring",
    "packet_size": 512,
    "queue_depth": 32,
    "medium_scratch": 32768,
    "event_cap": 1000000,
    "link": {
      "bytes_per_cycle": 16,
      "clock_hz": 250e6,
      "hop_latency_cycles": 44,
      "packet_overhead_bytes": 27,
      "min_packet_period_cycles": 12
    },
    "segment": { "shared_size": 1048576, "private_size": 262144 },
    "dla": {
      "pe_rows": 16, "pe_cols": 8, "macs_per_pe_per_cycle": 16,
      "clock_hz": 250e6, "drain_overhead_cycles": 512
    }
  })";
  const JobConfig cfg = parse_config_json(text);
  CHECK(cfg.node_count == 2);
  CHECK(cfg.packet_size == 512);
  CHECK(cfg.core.queue_depth == 32);
  CHECK(cfg.medium_scratch == 32768);
  CHECK(cfg.event_cap == 1000000);
  CHECK(cfg.link.hop_latency_cycles == 44);
  CHECK(cfg.link.packet_overhead_bytes == 27);
  CHECK(cfg.segment.shared_size == 1048576);
  CHECK(cfg.dla.drain_overhead_cycles == 512);

  // a parsed config must be acceptable to the runtime
  Runtime rt = Runtime::init(cfg);
  rt.attach();
  CHECK(rt.node_count() == 2);
}

TEST_CASE("malformed json and wrong types are rejected") {
  CHECK_THROWS_AS((void)parse_config_json("not json"), Error);
  CHECK_THROWS_AS((void)parse_config_json("[1,2]"), Error);
  try {
    (void)parse_config_json(R"({"nodes": "two"})");
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("missing config file raises IoError") {
  try {
    (void)load_config_file("/definitely/not/here.json");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}
