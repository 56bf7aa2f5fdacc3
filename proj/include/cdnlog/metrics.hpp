#pragma once

// Aggregate statistics over classified (optionally geo-enriched) records.
//
// Every aggregator follows the same shard/merge contract: add() records to
// independent instances, merge() them in any order, and the result equals a
// single pass over the concatenated input.
//
// Hit rates, with C = n_miss + n_hit + n_hit1 (LOCAL requests never reach
// the CDN and are excluded):
//
//   edge     = n_hit / C
//   regional = n_hit1 / (n_hit1 + n_miss)
//   system   = (n_hit + n_hit1) / C  =  edge + (1 - edge) * regional
//
// A rate whose denominator is zero is undefined (nullopt), never 0.
//
// Quantiles use linear interpolation between order statistics: for sorted
// x[0..n-1], q(p) = x[floor(h)] + (h - floor(h)) * (x[floor(h)+1] - x[floor(h)])
// with h = (n - 1) * p. Whiskers follow Tukey: the most extreme data points
// within 1.5 * IQR of the quartiles.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdnlog/classify.hpp"
#include "cdnlog/geoip.hpp"
#include "cdnlog/logline.hpp"

namespace cdnlog {

struct HitCounts {
  std::uint64_t n_miss = 0;
  std::uint64_t n_hit = 0;
  std::uint64_t n_hit1 = 0;
  std::uint64_t n_local = 0;

  void add(HitStatus s);
  std::uint64_t cdn_requests() const { return n_miss + n_hit + n_hit1; }
  HitCounts& operator+=(const HitCounts& o);
  friend HitCounts operator+(HitCounts a, const HitCounts& b) { return a += b; }
  friend bool operator==(const HitCounts&, const HitCounts&) = default;
};

struct HitRateReport {
  HitCounts counts;
  std::optional<double> edge_rate;
  std::optional<double> regional_rate;
  std::optional<double> system_rate;

  friend bool operator==(const HitRateReport&, const HitRateReport&) = default;
};

// With include_local_in_system, LOCAL requests count as served hits in the
// system rate only (sensitivity analysis; breaks the identity above).
HitRateReport hit_rate_report(const HitCounts& counts, bool include_local_in_system = false);

struct FiveNumberSummary {
  double lower_whisker = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double upper_whisker = 0;
  double mean = 0;
  std::uint64_t count = 0;
  // Quartiles estimated from a reservoir sample (mean and count stay exact).
  bool approximate = false;

  friend bool operator==(const FiveNumberSummary&, const FiveNumberSummary&) = default;
};

using LatencySummary = FiveNumberSummary;

// Summary of integer observations, reported as value / divisor. Reorders
// `values`. Requires a non-empty input.
FiveNumberSummary summarize(std::vector<std::int64_t>& values, double divisor = 1.0);
double quantile_sorted(std::span<const std::int64_t> sorted, double p);

// Collects integer observations for exact quantiles. Past `exact_limit`
// values it keeps a deterministic reservoir of `reservoir_size` instead.
class ValueCollector {
 public:
  static constexpr std::size_t kDefaultExactLimit = 10'000'000;
  static constexpr std::size_t kDefaultReservoirSize = 1'000'000;

  explicit ValueCollector(std::size_t exact_limit = kDefaultExactLimit,
                          std::size_t reservoir_size = kDefaultReservoirSize);

  void add(std::int64_t v);
  void merge(const ValueCollector& other);

  std::uint64_t count() const { return count_; }
  bool approximate() const { return approximate_; }
  FiveNumberSummary summary(double divisor) const;

  friend bool operator==(const ValueCollector&, const ValueCollector&) = default;

 private:
  void to_reservoir();
  std::uint64_t next_random();

  std::size_t exact_limit_;
  std::size_t reservoir_size_;
  std::vector<std::int64_t> values_;
  std::uint64_t count_ = 0;
  __int128 sum_ = 0;
  bool approximate_ = false;
  std::uint64_t rng_state_ = 0x2545f4914f6cdd1dull;
};

enum class GroupKey : std::uint8_t { All, Service, Isp, Province, Country, Hour };
std::string_view to_string(GroupKey k);
std::optional<GroupKey> parse_group_key(std::string_view s);

// Geo data attached after classification; nullopt when not enriched or
// the address was invalid.
struct EnrichedRecord {
  ClassifiedRecord classified;
  std::optional<GeoInfo> geo;

  friend bool operator==(const EnrichedRecord&, const EnrichedRecord&) = default;
};

// "all", the service token, geo field ("unknown" without geo), or the local
// hour "YYYY-MM-DD HH:00 +ZZZZ".
std::string group_label(const ClassifiedRecord& r, const GeoInfo* geo, GroupKey key);
std::string hour_label(std::int64_t local_hour_start, std::int32_t utc_offset_minutes);

class HitRateAggregator {
 public:
  explicit HitRateAggregator(GroupKey key = GroupKey::All) : key_(key) {}
  void add(const ClassifiedRecord& r, const GeoInfo* geo = nullptr);
  void merge(const HitRateAggregator& other);
  std::map<std::string, HitRateReport> reports(bool include_local_in_system = false) const;
  const std::map<std::string, HitCounts>& counts() const { return counts_; }

 private:
  GroupKey key_;
  std::map<std::string, HitCounts> counts_;
};

class LatencyAggregator {
 public:
  explicit LatencyAggregator(GroupKey key = GroupKey::All, std::size_t exact_limit = ValueCollector::kDefaultExactLimit,
                             std::size_t reservoir_size = ValueCollector::kDefaultReservoirSize)
      : key_(key), exact_limit_(exact_limit), reservoir_size_(reservoir_size) {}
  void add(const ClassifiedRecord& r, const GeoInfo* geo = nullptr);
  void merge(const LatencyAggregator& other);
  // Seconds. Empty groups do not appear.
  std::map<std::string, LatencySummary> summaries() const;

 private:
  ValueCollector& slot(const std::string& label);

  GroupKey key_;
  std::size_t exact_limit_;
  std::size_t reservoir_size_;
  std::map<std::string, ValueCollector> values_;
};

struct TimeSeriesBucket {
  std::int64_t bucket_start = 0;  // hour-aligned local seconds
  std::int32_t utc_offset_minutes = 0;
  std::uint64_t request_count = 0;
  std::uint64_t total_bytes = 0;
  std::int64_t latency_sum_ms = 0;
  HitCounts hits;

  std::int64_t unix_start() const { return bucket_start - std::int64_t{utc_offset_minutes} * 60; }
  double latency_sum_seconds() const { return static_cast<double>(latency_sum_ms) / 1000.0; }
  double mean_latency_seconds() const;
  friend bool operator==(const TimeSeriesBucket&, const TimeSeriesBucket&) = default;
};

// Buckets by wall-clock hour in each record's own UTC offset.
class TimeSeriesAggregator {
 public:
  void add(const LogRecord& r);
  void merge(const TimeSeriesAggregator& other);
  // Ordered by absolute start time, then offset.
  std::vector<TimeSeriesBucket> buckets() const;

 private:
  std::map<std::pair<std::int64_t, std::int32_t>, TimeSeriesBucket> buckets_;
};

std::vector<TimeSeriesBucket> time_series(std::span<const LogRecord> records);

enum class MimeClass : std::uint8_t { M3u8, Mpd, Ts, Dash, Mp3, Mp4, Image, Other };
inline constexpr std::size_t kMimeClassCount = 8;
std::string_view to_string(MimeClass m);
MimeClass mime_class_of(std::string_view path);

struct MimeTally {
  std::array<std::uint64_t, kMimeClassCount> requests{};
  std::array<std::uint64_t, kMimeClassCount> bytes{};

  void add(const LogRecord& r);
  MimeTally& operator+=(const MimeTally& o);
  friend bool operator==(const MimeTally&, const MimeTally&) = default;
};

struct MimeBreakdown {
  MimeTally tally;
  // All zero when there are no requests (respectively no bytes).
  std::array<double, kMimeClassCount> request_fraction{};
  std::array<double, kMimeClassCount> byte_fraction{};

  friend bool operator==(const MimeBreakdown&, const MimeBreakdown&) = default;
};

MimeBreakdown mime_breakdown(const MimeTally& tally);
MimeBreakdown mime_breakdown(std::span<const LogRecord> records);

// Per-service summary of size in decimal megabytes (bytes / 1e6).
using SizeDistribution = std::map<ServiceClass, FiveNumberSummary>;

class SizeAggregator {
 public:
  explicit SizeAggregator(std::size_t exact_limit = ValueCollector::kDefaultExactLimit,
                          std::size_t reservoir_size = ValueCollector::kDefaultReservoirSize)
      : exact_limit_(exact_limit), reservoir_size_(reservoir_size) {}
  void add(const ClassifiedRecord& r);
  void merge(const SizeAggregator& other);
  SizeDistribution distribution() const;

 private:
  std::size_t exact_limit_;
  std::size_t reservoir_size_;
  std::map<ServiceClass, ValueCollector> values_;
};

std::map<std::string, HitRateReport> hit_rates(std::span<const EnrichedRecord> records, GroupKey key,
                                               bool include_local_in_system = false);
std::map<std::string, HitRateReport> hit_rates(std::span<const ClassifiedRecord> records, GroupKey key,
                                               bool include_local_in_system = false);
std::map<std::string, LatencySummary> latency_summary(std::span<const EnrichedRecord> records, GroupKey key);
std::map<std::string, LatencySummary> latency_summary(std::span<const ClassifiedRecord> records, GroupKey key);
SizeDistribution size_distribution(std::span<const ClassifiedRecord> records);

struct ReportOptions {
  std::vector<GroupKey> groups = {GroupKey::All, GroupKey::Service, GroupKey::Isp, GroupKey::Province,
                                  GroupKey::Country};
  bool include_local_in_system = false;
  std::size_t exact_quantile_limit = ValueCollector::kDefaultExactLimit;
  std::size_t reservoir_size = ValueCollector::kDefaultReservoirSize;
};

struct Report {
  std::map<GroupKey, std::map<std::string, HitRateReport>> hit_rates;
  std::map<GroupKey, std::map<std::string, LatencySummary>> latency;
  std::vector<TimeSeriesBucket> time_series;
  std::map<ServiceClass, std::vector<TimeSeriesBucket>> time_series_by_service;
  MimeBreakdown mime;
  SizeDistribution sizes;
  ClassCounts class_counts;
  std::uint64_t records = 0;

  friend bool operator==(const Report&, const Report&) = default;
};

// Everything the report command emits, built in one pass.
class ReportBuilder {
 public:
  explicit ReportBuilder(ReportOptions opts = {});
  void add(const ClassifiedRecord& r, const GeoInfo* geo = nullptr);
  void add(const EnrichedRecord& r) { add(r.classified, r.geo ? &*r.geo : nullptr); }
  void merge(const ReportBuilder& other);
  Report finish() const;

 private:
  ReportOptions opts_;
  std::vector<HitRateAggregator> hit_;
  std::vector<LatencyAggregator> latency_;
  TimeSeriesAggregator series_;
  std::map<ServiceClass, TimeSeriesAggregator> series_by_service_;
  MimeTally mime_;
  SizeAggregator sizes_;
  ClassCounts class_counts_;
  std::uint64_t records_ = 0;
};

}  // namespace cdnlog
