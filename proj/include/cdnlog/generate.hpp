#pragma once

// Synthetic request traces: class mix, Zipf popularity within each class
// catalog, diurnal Poisson arrivals, log-normal sizes per service and an IP
// pool with ISP/province structure.
//
// Every random draw comes from one std::mt19937_64 seeded from
// WorkloadConfig::seed, converted with portable arithmetic (no <random>
// distributions), so a seed reproduces the same bytes on any platform with
// the same libm.

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdnlog/classify.hpp"
#include "cdnlog/simulate.hpp"

namespace cdnlog {

using Rng = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits.
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

inline constexpr double kQuartileZ = 0.674489750196082;  // Phi^-1(0.75)

struct LogNormalParams {
  double mu = 0;
  double sigma = 1;
  friend bool operator==(const LogNormalParams&, const LogNormalParams&) = default;
};

// Symmetric-quartile fit: mu = ln(median), sigma = (ln q3 - ln q1) / (2 z75).
// Throws std::invalid_argument unless 0 < q1 < median < q3.
LogNormalParams fit_lognormal(double q1, double median, double q3);
double sample_lognormal(const LogNormalParams& p, Rng& rng);

// P(k) = k^-s / H(n, s) for k in [1, n]; sampled by inverse CDF.
class ZipfDistribution {
 public:
  // Throws std::invalid_argument unless n >= 1 and s >= 0.
  ZipfDistribution(std::uint64_t n, double s);
  std::uint64_t operator()(Rng& rng) const;
  double pmf(std::uint64_t k) const;
  std::uint64_t n() const { return n_; }

 private:
  std::uint64_t n_;
  double s_;
  double harmonic_;
  std::vector<double> cdf_;
};

// Builds the distribution on every call: O(n). Reuse ZipfDistribution for
// repeated draws.
std::uint64_t zipf_sample(std::uint64_t n, double s, Rng& rng);

// The four traffic classes that appear in practice.
enum class TrafficClass : std::uint8_t { LiveNonPackaged, LivePackaged, VodNonPackaged, WebsiteNonPackaged };
inline constexpr std::size_t kTrafficClassCount = 4;
inline constexpr std::array<TrafficClass, 4> kAllTrafficClasses = {
    TrafficClass::LiveNonPackaged, TrafficClass::LivePackaged, TrafficClass::VodNonPackaged,
    TrafficClass::WebsiteNonPackaged};
std::string_view to_string(TrafficClass c);
ServiceClass service_of(TrafficClass c);
bool is_packaged(TrafficClass c);

struct ClassWorkload {
  double mix = 0;                  // fraction of all requests
  std::uint64_t catalog_size = 1;  // distinct assets
  double zipf_exponent = 0.8;
  LogNormalParams size_mb;         // size in decimal megabytes
  // Extension (with dot) → weight; each asset is requested in one of these
  // renditions, drawn per request.
  std::vector<std::pair<std::string, double>> extensions;
};

struct WeightedName {
  std::string name;
  double weight = 0;
  friend bool operator==(const WeightedName&, const WeightedName&) = default;
};

struct IspBlock {
  std::string name;
  double weight = 0;
  std::uint8_t first_octet = 0;  // addresses a.b.<province>.<host>
  std::uint8_t second_octet = 0;
};

struct WorkloadConfig {
  std::uint64_t seed = 1;
  std::int64_t start_unix_ms = 1543770000000;  // 2018-12-03 00:00:00 +0700
  std::int32_t utc_offset_minutes = 7 * 60;    // hour-of-day profile is local
  double duration_hours = 24;
  double requests_per_day = 100000;
  std::array<ClassWorkload, kTrafficClassCount> classes;
  std::array<double, 24> hourly_weights{};
  std::uint32_t ip_pool_size = 5000;
  std::vector<IspBlock> isps;
  std::vector<WeightedName> provinces;
  std::string country = "Vietnam";

  static WorkloadConfig defaults();
  // Throws ConfigError.
  void validate() const;
};

// Inhomogeneous Poisson arrival times (Unix ms), sorted, via time-rescaling
// of a unit-rate process through the piecewise-constant hourly intensity.
std::vector<std::int64_t> gen_arrivals(const WorkloadConfig& cfg, Rng& rng);

struct ContentInfo {
  TrafficClass cls;
  std::uint64_t size_bytes;
  std::uint64_t requests;
};

struct Ledger {
  std::uint64_t seed = 0;
  std::uint64_t requests = 0;
  std::array<std::uint64_t, kTrafficClassCount> class_counts{};
  std::array<double, kTrafficClassCount> configured_mix{};
  // MIME class name → expected request fraction under the configuration.
  std::map<std::string, double> configured_mime_requests;
  std::map<std::string, ContentInfo> contents;  // keyed by path

  std::string to_json() const;
};

struct GeneratedTrace {
  std::vector<RequestEvent> events;
  Ledger ledger;
  // "cidr,isp,province,country" rows covering every pool address.
  std::string geo_table_csv;
};

GeneratedTrace gen_trace(const WorkloadConfig& cfg);

std::string events_to_csv(std::span<const RequestEvent> events);

}  // namespace cdnlog
