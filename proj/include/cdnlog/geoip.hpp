#pragma once

// IP → (ISP, province, country) enrichment.
//
// A Resolver answers raw queries (offline CIDR table or an HTTP JSON API).
// Answers are normalized through a synonym table and deny-list, and every
// definitive outcome, including "invalid", is remembered in a GeoCache that
// can be persisted as CSV:
//
//   ip,isp,province,country        valid entry
//   ip,!,!,!                       invalid entry
//
// Fields are RFC 4180 quoted when needed; a valid field that is literally
// "!" is always written quoted so it cannot be mistaken for the marker.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "cdnlog/ip_address.hpp"

namespace cdnlog {

struct GeoInfo {
  std::string isp;
  std::string province;
  std::string country;

  friend bool operator==(const GeoInfo&, const GeoInfo&) = default;
};

// nullopt means the address is known to carry unusable location data.
using GeoOutcome = std::optional<GeoInfo>;

struct ResolverError {
  enum class Kind : std::uint8_t { NotFound, Network, Timeout, HttpStatus, BadResponse };
  Kind kind = Kind::NotFound;
  bool retryable = false;
  std::string message;
};

std::string_view to_string(ResolverError::Kind k);

using ResolveResult = std::variant<GeoInfo, ResolverError>;

class Resolver {
 public:
  virtual ~Resolver() = default;
  virtual ResolveResult resolve(const IpAddress& ip) = 0;
};

// Longest-prefix match over "cidr,isp,province,country" rows.
class CidrTableResolver : public Resolver {
 public:
  CidrTableResolver() = default;

  // Throws InputError (with line number) on malformed rows. A header row
  // starting with "cidr" is skipped.
  static CidrTableResolver load(const std::filesystem::path& path);
  static CidrTableResolver from_csv(std::string_view text, const std::string& source_name = "<memory>");

  void add(const Cidr& cidr, GeoInfo info);
  std::size_t size() const { return entries_; }

  ResolveResult resolve(const IpAddress& ip) override;

 private:
  // Per-prefix-length maps, index 0..32 for v4 and 33..161 for v6.
  std::vector<std::unordered_map<IpAddress, GeoInfo, IpAddressHash>> by_prefix_ = std::vector<std::unordered_map<IpAddress, GeoInfo, IpAddressHash>>(162);
  std::vector<int> lengths_v4_;
  std::vector<int> lengths_v6_;
  std::size_t entries_ = 0;
};

struct HttpResolverConfig {
  // "{ip}" is replaced by the address, e.g. "http://ip-api.com/json/{ip}".
  std::string url_template = "http://ip-api.com/json/{ip}";
  std::string isp_field = "isp";
  std::string province_field = "regionName";
  std::string country_field = "country";
  // Optional: a response whose `status_field` equals `fail_value` is a
  // definitive "not found".
  std::string status_field = "status";
  std::string fail_value = "fail";
  double requests_per_minute = 45.0;
  std::chrono::milliseconds timeout{2000};
};

// Client for a generic "ip → JSON object" lookup API. Requests are spaced at
// least 60/requests_per_minute seconds apart.
class HttpJsonResolver : public Resolver {
 public:
  explicit HttpJsonResolver(HttpResolverConfig cfg);
  ~HttpJsonResolver() override;

  ResolveResult resolve(const IpAddress& ip) override;

 private:
  struct Impl;
  HttpResolverConfig cfg_;
  std::unique_ptr<Impl> impl_;
  std::chrono::steady_clock::time_point next_allowed_{};
  std::mutex mu_;
};

// Variant location name → canonical name. Names not in the table map to
// themselves. Canonical names must be fixed points: a canonical name may not
// itself be mapped elsewhere.
class SynonymTable {
 public:
  // Throws ConfigError when the mapping would break the fixed-point rule.
  void add(std::string variant, std::string canonical);
  const std::string& canonical(const std::string& name) const;
  std::size_t size() const { return map_.size(); }

  // CSV "variant,canonical"; an optional "variant,canonical" header is skipped.
  static SynonymTable load(const std::filesystem::path& path);
  static SynonymTable from_csv(std::string_view text, const std::string& source_name = "<memory>");

 private:
  std::unordered_map<std::string, std::string> map_;
  std::unordered_set<std::string> canonicals_;
};

struct GeoNormalizer {
  SynonymTable synonyms;
  // Values (after synonym mapping) that mark an answer as unusable.
  std::unordered_set<std::string> deny_list;

  GeoOutcome normalize(const GeoInfo& raw) const;
};

GeoOutcome normalize(const GeoInfo& raw, const SynonymTable& syn,
                     const std::unordered_set<std::string>& deny_list = {});

// IP → outcome map. Safe for concurrent readers with a single writer at a time.
class GeoCache {
 public:
  GeoCache() = default;
  GeoCache(const GeoCache& other);
  GeoCache& operator=(const GeoCache& other);

  std::optional<GeoOutcome> find(const IpAddress& ip) const;
  void store(const IpAddress& ip, GeoOutcome outcome);
  std::size_t size() const;

  // Sorted by address for deterministic output.
  std::map<IpAddress, GeoOutcome> snapshot() const;

  std::string to_csv() const;
  static GeoCache from_csv(std::string_view text, const std::string& source_name = "<memory>");

  friend bool operator==(const GeoCache& a, const GeoCache& b) { return a.snapshot() == b.snapshot(); }

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<IpAddress, GeoOutcome, IpAddressHash> entries_;
};

void save_cache(const GeoCache& cache, const std::filesystem::path& path);
// Throws InputError naming the first malformed line.
GeoCache load_cache(const std::filesystem::path& path);

struct Invalid {
  friend bool operator==(Invalid, Invalid) { return true; }
};

// GeoInfo: usable answer. Invalid: unusable (cached). ResolverError:
// transient failure, not cached; a later lookup retries.
using LookupResult = std::variant<GeoInfo, Invalid, ResolverError>;

// Cache-first lookup. Definitive resolver outcomes (answers and
// non-retryable errors such as not_found) are normalized and cached;
// retryable errors are returned and not cached.
LookupResult lookup(const IpAddress& ip, GeoCache& cache, Resolver& resolver, const GeoNormalizer& normalizer);

}  // namespace cdnlog
