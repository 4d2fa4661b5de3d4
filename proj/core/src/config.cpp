#include "pgasim/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pgasim {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "'");
  }
}

}  // namespace

JobConfig parse_config_json(const std::string& text, const JobConfig& defaults) {
  JobConfig cfg = defaults;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "config root must be an object");

  read_field(j, "nodes", cfg.node_count);
  read_field(j, "topology", cfg.topology);
  read_field(j, "packet_size", cfg.packet_size);
  read_field(j, "event_cap", cfg.event_cap);
  read_field(j, "medium_scratch", cfg.medium_scratch);
  read_field(j, "queue_depth", cfg.core.queue_depth);
  read_field(j, "trace", cfg.trace);

  if (j.contains("link")) {
    const json& l = j.at("link");
    read_field(l, "bytes_per_cycle", cfg.link.bytes_per_cycle);
    read_field(l, "clock_hz", cfg.link.clock_hz);
    read_field(l, "hop_latency_cycles", cfg.link.hop_latency_cycles);
    read_field(l, "packet_overhead_bytes", cfg.link.packet_overhead_bytes);
    read_field(l, "min_packet_period_cycles", cfg.link.min_packet_period_cycles);
  }
  if (j.contains("segment")) {
    const json& s = j.at("segment");
    read_field(s, "shared_size", cfg.segment.shared_size);
    read_field(s, "private_size", cfg.segment.private_size);
  }
  if (j.contains("dla")) {
    const json& d = j.at("dla");
    read_field(d, "pe_rows", cfg.dla.pe_rows);
    read_field(d, "pe_cols", cfg.dla.pe_cols);
    read_field(d, "macs_per_pe_per_cycle", cfg.dla.macs_per_pe_per_cycle);
    read_field(d, "clock_hz", cfg.dla.clock_hz);
    read_field(d, "drain_overhead_cycles", cfg.dla.drain_overhead_cycles);
  }
  return cfg;
}

JobConfig load_config_file(const std::string& path, const JobConfig& defaults) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot read config file " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_json(buf.str(), defaults);
}

}  // namespace pgasim
