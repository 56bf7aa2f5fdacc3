#pragma once

// Trace-driven replay through a two-layer edge/regional cache hierarchy.
//
// Each request is routed to an edge by client-IP hash. An edge miss goes to
// the regional chosen by content hash. Packaged content is pre-stored at
// every regional and never misses there; non-packaged content that misses
// the regional is fetched from origin. On the way back the content is cached
// at every server it traversed.

#include <array>
#include <filesystem>
#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdnlog/classify.hpp"
#include "cdnlog/hash.hpp"
#include "cdnlog/logline.hpp"
#include "cdnlog/metrics.hpp"

namespace cdnlog {

enum class TtlMode : std::uint8_t {
  InsertTime,  // age measured from the last insertion; hits do not refresh it
  LastAccess,  // age measured from the last hit or insertion
};

struct LatencyModel {
  // Fixed per-request cost at each level, seconds.
  double t_local = 0.0;
  double t_edge = 0.005;
  double t_regional = 0.020;
  double t_origin = 0.100;
  // Transfer rate at each level, bytes per second.
  double bw_local = 1e12;
  double bw_edge = 1.25e9;
  double bw_regional = 2.5e8;
  double bw_origin = 5e7;
};

struct TopologyConfig {
  std::uint32_t n_edges = 3;
  std::uint32_t n_regionals = 2;
  std::uint64_t edge_capacity_bytes = 32ull << 30;
  std::uint64_t regional_capacity_bytes = 32ull << 30;
  // Seconds; 0 disables expiry for that service.
  std::map<ServiceClass, std::uint64_t> ttl_by_service = {
      {ServiceClass::LiveStreaming, 0}, {ServiceClass::VideoOnDemand, 0}, {ServiceClass::Website, 0}};
  TtlMode ttl_mode = TtlMode::InsertTime;
  LatencyModel latency;
  // Report edge misses on packaged content as HIT instead of HIT1.
  bool packaged_always_hit_at_edge = false;
  // Per-client cache capacity; 0 disables client-side caching (no LOCAL).
  std::uint64_t client_cache_bytes = 0;
  // Offset used when writing simulated log timestamps.
  std::int32_t output_utc_offset_minutes = 7 * 60;

  // Throws ConfigError.
  void validate() const;
  std::uint64_t ttl_seconds(ServiceClass s) const;
};

std::uint32_t route_edge(std::string_view client_ip_text, const TopologyConfig& cfg);
std::uint32_t route_regional(std::string_view content_identity, const TopologyConfig& cfg);

enum class AccessResult : std::uint8_t { Miss, Hit };

// Byte-capacity LRU cache with optional per-access TTL. Times are in
// milliseconds.
class CacheNode {
 public:
  explicit CacheNode(std::uint64_t capacity_bytes) : capacity_(capacity_bytes) {}
  CacheNode(const CacheNode&) = delete;
  CacheNode& operator=(const CacheNode&) = delete;
  CacheNode(CacheNode&&) noexcept = default;
  CacheNode& operator=(CacheNode&&) noexcept = default;

  // Hit iff resident and not expired. A hit makes the entry most recent.
  // Expired entries are removed. Objects larger than the capacity always
  // miss. Never inserts.
  AccessResult access(std::string_view identity, std::uint64_t size, std::int64_t now_ms, std::uint64_t ttl_seconds,
                      TtlMode mode = TtlMode::InsertTime);

  // Inserts or refreshes the entry as most recent with insert time `now_ms`,
  // then evicts least-recently-used entries until the contents fit. Returns
  // evicted identities in eviction order. Oversized objects are not stored.
  std::vector<std::string> insert(std::string_view identity, std::uint64_t size, std::int64_t now_ms);

  bool contains(std::string_view identity) const { return index_.find(identity) != index_.end(); }
  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t used_bytes() const { return used_; }
  std::size_t entry_count() const { return lru_.size(); }
  // Identities from most to least recently used.
  std::vector<std::string> recency_order() const;
  // used_bytes() equals the sum of entry sizes and does not exceed capacity.
  bool check_invariants() const;
  // Entries dropped by access() because their TTL had run out.
  std::uint64_t expirations() const { return expirations_; }

 private:
  struct Entry {
    std::string identity;
    std::uint64_t size;
    std::int64_t insert_ms;
    std::int64_t last_access_ms;
  };
  void erase(std::list<Entry>::iterator it);

  std::uint64_t capacity_;
  std::uint64_t used_ = 0;
  std::uint64_t expirations_ = 0;
  std::list<Entry> lru_;  // front = most recent
  // Keys view the identity stored in the list node.
  std::unordered_map<std::string_view, std::list<Entry>::iterator> index_;
};

struct RequestEvent {
  std::int64_t time_ms = 0;  // Unix epoch milliseconds
  std::string client_ip;     // canonical text
  std::string content;       // content identity
  std::uint64_t size_bytes = 0;
  ServiceClass service = ServiceClass::Website;
  bool packaged = false;

  friend bool operator==(const RequestEvent&, const RequestEvent&) = default;
};

enum class ServingLevel : std::uint8_t { Local, Edge, Regional, Origin };

struct SimOutcome {
  HitStatus status = HitStatus::Miss;
  double latency_seconds = 0;
  std::uint32_t edge = 0;
  std::uint32_t regional = 0;
  ServingLevel level = ServingLevel::Origin;

  friend bool operator==(const SimOutcome&, const SimOutcome&) = default;
};

struct NodeStats {
  std::uint64_t requests = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bytes_requested = 0;
  std::uint64_t bytes_hit = 0;
  std::uint64_t inserts = 0;
  std::uint64_t evictions = 0;
  std::uint64_t expirations = 0;

  std::optional<double> hit_ratio() const;
  std::optional<double> byte_hit_ratio() const;
  friend bool operator==(const NodeStats&, const NodeStats&) = default;
};

struct ReplayOptions {
  // The first `warmup_events` outcomes are produced but left out of the
  // summary statistics.
  std::size_t warmup_events = 0;
  // Verify every node's capacity invariant after each event; throws
  // std::logic_error on violation.
  bool check_invariants = false;
};

struct ReplaySummary {
  HitCounts statuses;
  std::vector<NodeStats> edges;
  std::vector<NodeStats> regionals;
  std::uint64_t bytes_total = 0;
  std::uint64_t bytes_from_origin = 0;
  std::uint64_t events = 0;

  friend bool operator==(const ReplaySummary&, const ReplaySummary&) = default;
  std::string to_json() const;
};

struct ReplayResult {
  std::vector<SimOutcome> outcomes;
  ReplaySummary summary;
};

class ReplayError : public std::runtime_error {
 public:
  ReplayError(std::size_t index, const std::string& what)
      : std::runtime_error("event " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Incremental form of replay(); feed events in non-decreasing time order.
class HierarchySimulator {
 public:
  explicit HierarchySimulator(TopologyConfig cfg, ReplayOptions opts = {});

  SimOutcome process(const RequestEvent& e);
  const ReplaySummary& summary() const { return summary_; }
  const CacheNode& edge(std::size_t i) const { return edges_[i]; }
  const CacheNode& regional(std::size_t i) const { return regionals_[i]; }
  const TopologyConfig& config() const { return cfg_; }

 private:
  void record_node(NodeStats& stats, bool hit, std::uint64_t size, bool counted);
  double latency(ServingLevel level, std::uint64_t size) const;

  TopologyConfig cfg_;
  ReplayOptions opts_;
  std::vector<CacheNode> edges_;
  std::vector<CacheNode> regionals_;
  std::unordered_map<std::string, CacheNode> clients_;
  ReplaySummary summary_;
  std::size_t index_ = 0;
  std::int64_t last_time_ms_ = 0;
};

ReplayResult replay(std::span<const RequestEvent> events, const TopologyConfig& cfg, const ReplayOptions& opts = {});

// A log line for each simulated outcome.
LogRecord to_log_record(const RequestEvent& e, const SimOutcome& o, std::int32_t utc_offset_minutes);
RequestEvent to_event(const ClassifiedRecord& r, const PatternConfig& cfg = {});

struct AgreementReport {
  // confusion[simulated][logged], indexed by HitStatus.
  std::array<std::array<std::uint64_t, 4>, 4> confusion{};
  std::uint64_t total = 0;
  std::uint64_t agreed = 0;
  // Undefined for empty input.
  std::optional<double> agreement() const;
  std::string to_json() const;
};

// Throws std::invalid_argument on length mismatch.
AgreementReport compare(std::span<const SimOutcome> simulated, std::span<const HitStatus> logged);
AgreementReport compare(std::span<const HitStatus> simulated, std::span<const HitStatus> logged);

// Event CSV: header "time_unix_ms,ip,path,size,service,packaged".
inline constexpr std::string_view kEventCsvHeader = "time_unix_ms,ip,path,size,service,packaged";
void append_event_csv(std::string& out, const RequestEvent& e);
// Throws InputError with the line number on malformed rows.
std::vector<RequestEvent> parse_event_csv(std::string_view text, const std::string& source_name = "<memory>");
std::vector<RequestEvent> load_event_csv(const std::filesystem::path& path);

}  // namespace cdnlog
