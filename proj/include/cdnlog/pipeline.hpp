#pragma once

// The subcommands as library functions. Each reads its inputs, writes files
// into `out_dir` and returns a JSON summary for stdout. Input problems throw
// InputError, configuration problems throw ConfigError.
//
// Files written:
//   clean     clean.log, clean_stats.json
//   classify  labeled.csv, class_counts.csv
//   enrich    enriched.csv (+ the geo cache file, when configured)
//   report    report.json, hit_rates.csv, latency.csv, time_series.csv,
//             mime.csv, sizes.csv, class_counts.csv, and plot/*.csv with
//             --plot-data
//   simulate  simulated.log, sim_summary.json (+ agreement.json when the
//             input carried logged statuses)
//   generate  events.csv, ledger.json, geo_table.csv

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdnlog/config.hpp"
#include "cdnlog/metrics.hpp"

namespace cdnlog {

using PathList = std::vector<std::filesystem::path>;

// Labeled CSV: one classified (and optionally geo-enriched) record per row.
inline constexpr std::string_view kLabeledHeader =
    "latency,client_ip,status,timestamp,content_path,size_bytes,service,packaging";
inline constexpr std::string_view kEnrichedHeader =
    "latency,client_ip,status,timestamp,content_path,size_bytes,service,packaging,isp,province,country";

void append_labeled_row(std::string& out, const ClassifiedRecord& r, const std::optional<GeoInfo>* geo = nullptr);
// Parses one data row of either layout. Returns nullopt on malformed rows.
std::optional<EnrichedRecord> parse_labeled_row(std::string_view line, bool enriched);

enum class InputFormat : std::uint8_t { Log, Labeled, Enriched, Events };
// Classifies a file by its first line.
InputFormat detect_format(std::string_view first_line);

struct CommonOptions {
  unsigned threads = 1;
};

std::string cmd_clean(const PathList& inputs, const std::filesystem::path& out_dir, const CommonOptions& opts = {});

std::string cmd_classify(const PathList& inputs, const PatternConfig& patterns, const std::filesystem::path& out_dir,
                         const CommonOptions& opts = {});

// `cache_path` overrides geo.cache from the config when non-empty.
std::string cmd_enrich(const PathList& inputs, const GeoConfig& geo, const std::filesystem::path& cache_path,
                       const std::filesystem::path& out_dir, const CommonOptions& opts = {});

struct ReportFlags {
  bool plot_data = false;
};

// Inputs may be raw logs (cleaned and classified in-process), labeled CSV
// or enriched CSV. All inputs must share one layout.
std::string cmd_report(const PathList& inputs, const RunConfig& cfg, const ReportFlags& flags,
                       const std::filesystem::path& out_dir, const CommonOptions& opts = {});

// Builds the report without writing files.
Report build_report(const PathList& inputs, const RunConfig& cfg, const CommonOptions& opts = {});

struct SimulateFlags {
  // Stable-sort events by time instead of rejecting out-of-order input.
  bool sort = false;
  std::size_t warmup_events = 0;
  bool check_invariants = false;
};

// Inputs are event CSV files or raw logs (classified in-process).
std::string cmd_simulate(const PathList& inputs, const RunConfig& cfg, const SimulateFlags& flags,
                         const std::filesystem::path& out_dir, const CommonOptions& opts = {});

std::string cmd_generate(const WorkloadConfig& workload, const std::filesystem::path& out_dir);

// JSON renderings shared by report.json and the Python bindings.
std::string report_to_json(const Report& r);

}  // namespace cdnlog
