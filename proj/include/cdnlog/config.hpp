#pragma once

// JSON run configuration. Every section is optional and unknown keys are
// rejected. Relative file paths are resolved against the config file's
// directory.
//
// {
//   "patterns": {"live_patterns": [...], "streaming_extensions": [...],
//                "strip_session_token": false, "hash_threshold": 1000000},
//   "geo": {"resolver": "table" | "http", "table": "geo.csv",
//           "synonyms": "syn.csv", "deny_list": ["N/A"], "cache": "geo_cache.csv",
//           "http": {"url_template": "...", "isp_field": "isp", ...,
//                    "requests_per_minute": 45, "timeout_ms": 2000}},
//   "topology": {"n_edges": 3, "n_regionals": 2, "edge_capacity_bytes": ...,
//                "regional_capacity_bytes": ..., "ttl_seconds": {"live": 0, ...},
//                "ttl_mode": "insert_time" | "last_access",
//                "packaged_always_hit_at_edge": false, "client_cache_bytes": 0,
//                "output_utc_offset_minutes": 420, "latency": {"t_edge": ..., "bw_edge": ...}},
//   "workload": {"seed": 1, "start_unix_ms": ..., "utc_offset_minutes": 420,
//                "duration_hours": 24, "requests_per_day": 100000,
//                "classes": {"live/no": {"mix": ..., "catalog_size": ..., "zipf_exponent": ...,
//                                        "size_quartiles_mb": [q1, median, q3],
//                                        "extensions": {".ts": 0.5}}, ...},
//                "hourly_weights": [24 numbers], "ip_pool_size": 5000,
//                "isps": [{"name": "FPT", "weight": 0.5, "prefix": "118.68"}],
//                "provinces": [{"name": "Hanoi", "weight": 0.2352}], "country": "Vietnam"},
//   "report": {"groups": ["all", "service", "isp", "province", "country", "hour"],
//              "include_local_in_system": false,
//              "exact_quantile_limit": 10000000, "reservoir_size": 1000000}
// }

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>

#include "cdnlog/classify.hpp"
#include "cdnlog/generate.hpp"
#include "cdnlog/geoip.hpp"
#include "cdnlog/metrics.hpp"
#include "cdnlog/simulate.hpp"

namespace cdnlog {

struct GeoConfig {
  enum class Kind : std::uint8_t { Table, Http };
  Kind resolver = Kind::Table;
  std::filesystem::path table;
  std::filesystem::path synonyms;
  std::filesystem::path cache;
  std::unordered_set<std::string> deny_list;
  HttpResolverConfig http;
};

struct RunConfig {
  PatternConfig patterns;
  GeoConfig geo;
  TopologyConfig topology;
  WorkloadConfig workload = WorkloadConfig::defaults();
  ReportOptions report;
};

// Throws ConfigError on malformed JSON, unknown keys, wrong types or values
// that fail validation.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace cdnlog
