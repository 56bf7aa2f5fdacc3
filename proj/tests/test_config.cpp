#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "cdnlog/config.hpp"
#include "cdnlog/errors.hpp"

using namespace cdnlog;
namespace fs = std::filesystem;

TEST(Config, EmptyObjectGivesDefaults) {
  auto c = parse_config("{}");
  EXPECT_EQ(c.topology.n_edges, 3u);
  EXPECT_EQ(c.topology.n_regionals, 2u);
  EXPECT_EQ(c.geo.resolver, GeoConfig::Kind::Table);
  EXPECT_EQ(c.report.groups.size(), 5u);
  EXPECT_NO_THROW(c.workload.validate());
}

TEST(Config, FullDocument) {
  auto c = parse_config(R"({
    "patterns": {"live_patterns": ["tv", "live"], "streaming_extensions": [".ts"], "strip_session_token": true},
    "geo": {"resolver": "http", "deny_list": ["Unknown"], "cache": "c.csv",
            "http": {"url_template": "http://localhost/{ip}", "requests_per_minute": 30, "timeout_ms": 500}},
    "topology": {"n_edges": 4, "n_regionals": 1, "edge_capacity_bytes": 1000, "regional_capacity_bytes": 5000,
                 "ttl_seconds": {"live": 60, "vod": 0, "website": 3600}, "ttl_mode": "last_access",
                 "packaged_always_hit_at_edge": true, "latency": {"t_edge": 0.001}},
    "workload": {"seed": 9, "requests_per_day": 500, "classes": {"vod/no": {"catalog_size": 10,
                 "size_quartiles_mb": [0.0866492, 0.2026076, 0.3279754], "extensions": {".dash": 1.0}}}},
    "report": {"groups": ["all", "isp", "hour"], "include_local_in_system": true}
  })",
                        "/base");
  EXPECT_EQ(c.patterns.live_patterns, (std::vector<std::string>{"tv", "live"}));
  EXPECT_TRUE(c.patterns.strip_session_token);
  EXPECT_EQ(c.geo.resolver, GeoConfig::Kind::Http);
  EXPECT_EQ(c.geo.cache, fs::path("/base/c.csv"));
  EXPECT_TRUE(c.geo.deny_list.count("Unknown"));
  EXPECT_EQ(c.geo.http.timeout, std::chrono::milliseconds(500));
  EXPECT_EQ(c.topology.n_edges, 4u);
  EXPECT_EQ(c.topology.ttl_seconds(ServiceClass::LiveStreaming), 60u);
  EXPECT_EQ(c.topology.ttl_seconds(ServiceClass::Website), 3600u);
  EXPECT_EQ(c.topology.ttl_mode, TtlMode::LastAccess);
  EXPECT_TRUE(c.topology.packaged_always_hit_at_edge);
  EXPECT_DOUBLE_EQ(c.topology.latency.t_edge, 0.001);
  EXPECT_EQ(c.workload.seed, 9u);
  auto& vod = c.workload.classes[static_cast<std::size_t>(TrafficClass::VodNonPackaged)];
  EXPECT_EQ(vod.catalog_size, 10u);
  EXPECT_EQ(vod.size_mb, fit_lognormal(0.0866492, 0.2026076, 0.3279754));
  EXPECT_EQ(vod.extensions.size(), 1u);
  EXPECT_EQ(c.report.groups, (std::vector<GroupKey>{GroupKey::All, GroupKey::Isp, GroupKey::Hour}));
  EXPECT_TRUE(c.report.include_local_in_system);
}

TEST(Config, Rejections) {
  const char* bad[] = {
      "not json",
      "[]",
      R"({"unknown": 1})",
      R"({"topology": {"n_edges": 0}})",
      R"({"topology": {"n_edges": "3"}})",
      R"({"topology": {"ttl_mode": "forever"}})",
      R"({"topology": {"ttl_seconds": {"radio": 5}}})",
      R"({"topology": {"latency": {"bw_edge": 0}}})",
      R"({"geo": {"resolver": "dns"}})",
      R"({"geo": {"resolver": "table"}})",
      R"({"geo": {"http": {"timeout": 5}}})",
      R"({"workload": {"classes": {"radio/no": {}}}})",
      R"({"workload": {"classes": {"live/no": {"size_quartiles_mb": [1, 1, 1]}}}})",
      R"({"workload": {"hourly_weights": [1, 2, 3]}})",
      R"({"workload": {"isps": []}})",
      R"({"report": {"groups": ["city"]}})",
      R"({"report": {"reservoir_size": 0}})",
      R"({"patterns": {"live_patterns": "tv"}})",
  };
  for (const char* text : bad) EXPECT_THROW(parse_config(text), ConfigError) << text;
}

TEST(Config, LoadResolvesRelativePaths) {
  auto dir = fs::temp_directory_path() / ("cdnlog_cfg_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream(dir / "run.json") << R"({"geo": {"table": "geo.csv", "synonyms": "/abs/syn.csv"}})";
  }
  auto c = load_config(dir / "run.json");
  EXPECT_EQ(c.geo.table, dir / "geo.csv");
  EXPECT_EQ(c.geo.synonyms, fs::path("/abs/syn.csv"));
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  fs::remove_all(dir);
}
