#pragma once

#include <string>

#include "pgasim/api.hpp"

namespace pgasim {

/// Parses the JSON job configuration. All keys optional; unknown keys are
/// ignored. Shape:
///   { "nodes": 2, "topology": "ring",
///     "link": { "bytes_per_cycle": 16, "clock_hz": 250e6,
///               "hop_latency_cycles": 47, "packet_overhead_bytes": 16,
///               "min_packet_period_cycles": 12 },
///     "segment": { "shared_size": ..., "private_size": ... },
///     "medium_scratch": 65536,
///     "dla": { "pe_rows": 16, "pe_cols": 8, "macs_per_pe_per_cycle": 16,
///              "clock_hz": 250e6, "drain_overhead_cycles": 24000 },
///     "packet_size": 1024, "queue_depth": 64, "event_cap": ... }
JobConfig parse_config_json(const std::string& text, const JobConfig& defaults = {});

/// Reads and parses a config file. Throws IoError / InvalidConfig.
JobConfig load_config_file(const std::string& path, const JobConfig& defaults = {});

}  // namespace pgasim
