#include "cdnlog/simulate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cdnlog/errors.hpp"
#include "cdnlog/io.hpp"

namespace cdnlog {

// --- config / routing ---

void TopologyConfig::validate() const {
  if (n_edges < 1) throw ConfigError("topology.n_edges must be >= 1");
  if (n_regionals < 1) throw ConfigError("topology.n_regionals must be >= 1");
  if (edge_capacity_bytes == 0) throw ConfigError("topology.edge_capacity_bytes must be > 0");
  if (regional_capacity_bytes == 0) throw ConfigError("topology.regional_capacity_bytes must be > 0");
  const auto& l = latency;
  if (l.t_local < 0 || !(l.t_local <= l.t_edge && l.t_edge <= l.t_regional && l.t_regional <= l.t_origin)) {
    throw ConfigError("topology.latency: base latencies must satisfy 0 <= local <= edge <= regional <= origin");
  }
  for (double bw : {l.bw_local, l.bw_edge, l.bw_regional, l.bw_origin}) {
    if (!(bw > 0)) throw ConfigError("topology.latency: bandwidths must be positive");
  }
}

std::uint64_t TopologyConfig::ttl_seconds(ServiceClass s) const {
  auto it = ttl_by_service.find(s);
  return it == ttl_by_service.end() ? 0 : it->second;
}

std::uint32_t route_edge(std::string_view client_ip_text, const TopologyConfig& cfg) {
  return static_cast<std::uint32_t>(fnv1a64(client_ip_text) % cfg.n_edges);
}

std::uint32_t route_regional(std::string_view content_identity, const TopologyConfig& cfg) {
  return static_cast<std::uint32_t>(fnv1a64(content_identity) % cfg.n_regionals);
}

// --- CacheNode ---

void CacheNode::erase(std::list<Entry>::iterator it) {
  used_ -= it->size;
  index_.erase(std::string_view(it->identity));
  lru_.erase(it);
}

AccessResult CacheNode::access(std::string_view identity, std::uint64_t size, std::int64_t now_ms,
                               std::uint64_t ttl_seconds, TtlMode mode) {
  if (size > capacity_) return AccessResult::Miss;
  auto found = index_.find(identity);
  if (found == index_.end()) return AccessResult::Miss;
  auto it = found->second;
  if (ttl_seconds > 0) {
    std::int64_t since = mode == TtlMode::InsertTime ? it->insert_ms : it->last_access_ms;
    if (now_ms - since > static_cast<std::int64_t>(ttl_seconds) * 1000) {
      erase(it);
      ++expirations_;
      return AccessResult::Miss;
    }
  }
  it->last_access_ms = now_ms;
  lru_.splice(lru_.begin(), lru_, it);
  return AccessResult::Hit;
}

std::vector<std::string> CacheNode::insert(std::string_view identity, std::uint64_t size, std::int64_t now_ms) {
  std::vector<std::string> evicted;
  if (size > capacity_) return evicted;
  auto found = index_.find(identity);
  if (found != index_.end()) {
    auto it = found->second;
    used_ = used_ - it->size + size;
    it->size = size;
    it->insert_ms = now_ms;
    it->last_access_ms = now_ms;
    lru_.splice(lru_.begin(), lru_, it);
  } else {
    lru_.push_front(Entry{std::string(identity), size, now_ms, now_ms});
    index_.emplace(std::string_view(lru_.front().identity), lru_.begin());
    used_ += size;
  }
  while (used_ > capacity_) {
    auto victim = std::prev(lru_.end());
    evicted.push_back(victim->identity);
    erase(victim);
  }
  return evicted;
}

std::vector<std::string> CacheNode::recency_order() const {
  std::vector<std::string> out;
  out.reserve(lru_.size());
  for (const auto& e : lru_) out.push_back(e.identity);
  return out;
}

bool CacheNode::check_invariants() const {
  std::uint64_t sum = 0;
  for (const auto& e : lru_) sum += e.size;
  return sum == used_ && used_ <= capacity_ && index_.size() == lru_.size();
}

// --- replay ---

std::optional<double> NodeStats::hit_ratio() const {
  if (requests == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(requests);
}

std::optional<double> NodeStats::byte_hit_ratio() const {
  if (bytes_requested == 0) return std::nullopt;
  return static_cast<double>(bytes_hit) / static_cast<double>(bytes_requested);
}

HierarchySimulator::HierarchySimulator(TopologyConfig cfg, ReplayOptions opts) : cfg_(std::move(cfg)), opts_(opts) {
  cfg_.validate();
  for (std::uint32_t i = 0; i < cfg_.n_edges; ++i) edges_.emplace_back(cfg_.edge_capacity_bytes);
  for (std::uint32_t i = 0; i < cfg_.n_regionals; ++i) regionals_.emplace_back(cfg_.regional_capacity_bytes);
  summary_.edges.resize(cfg_.n_edges);
  summary_.regionals.resize(cfg_.n_regionals);
}

double HierarchySimulator::latency(ServingLevel level, std::uint64_t size) const {
  const auto& m = cfg_.latency;
  const auto bytes = static_cast<double>(size);
  switch (level) {
    case ServingLevel::Local: return m.t_local + bytes / m.bw_local;
    case ServingLevel::Edge: return m.t_edge + bytes / m.bw_edge;
    case ServingLevel::Regional: return m.t_regional + bytes / m.bw_regional;
    case ServingLevel::Origin: return m.t_origin + bytes / m.bw_origin;
  }
  return 0;
}

void HierarchySimulator::record_node(NodeStats& stats, bool hit, std::uint64_t size, bool counted) {
  if (!counted) return;
  ++stats.requests;
  stats.bytes_requested += size;
  if (hit) {
    ++stats.hits;
    stats.bytes_hit += size;
  } else {
    ++stats.misses;
  }
}

SimOutcome HierarchySimulator::process(const RequestEvent& e) {
  if (index_ > 0 && e.time_ms < last_time_ms_) {
    throw ReplayError(index_, "time " + std::to_string(e.time_ms) + " precedes previous event time " +
                                  std::to_string(last_time_ms_));
  }
  last_time_ms_ = e.time_ms;
  const bool counted = index_ >= opts_.warmup_events;
  const std::uint64_t ttl = cfg_.ttl_seconds(e.service);
  const std::int64_t now = e.time_ms;

  SimOutcome out;
  out.edge = route_edge(e.client_ip, cfg_);
  out.regional = route_regional(e.content, cfg_);

  CacheNode* client = nullptr;
  if (cfg_.client_cache_bytes > 0) {
    client = &clients_.try_emplace(e.client_ip, cfg_.client_cache_bytes).first->second;
  }

  CacheNode& edge = edges_[out.edge];
  CacheNode& regional = regionals_[out.regional];
  NodeStats& edge_stats = summary_.edges[out.edge];
  NodeStats& regional_stats = summary_.regionals[out.regional];
  const std::uint64_t edge_exp = edge.expirations();
  const std::uint64_t regional_exp = regional.expirations();

  auto count_evictions = [&](NodeStats& stats, std::size_t n) {
    if (!counted) return;
    ++stats.inserts;
    stats.evictions += n;
  };

  if (client != nullptr && client->access(e.content, e.size_bytes, now, ttl, cfg_.ttl_mode) == AccessResult::Hit) {
    out.status = HitStatus::Local;
    out.level = ServingLevel::Local;
  } else if (edge.access(e.content, e.size_bytes, now, ttl, cfg_.ttl_mode) == AccessResult::Hit) {
    record_node(edge_stats, true, e.size_bytes, counted);
    out.status = HitStatus::Hit;
    out.level = ServingLevel::Edge;
  } else {
    record_node(edge_stats, false, e.size_bytes, counted);
    if (e.packaged) {
      // Pre-stored at the regional; not subject to its LRU.
      record_node(regional_stats, true, e.size_bytes, counted);
      out.status = cfg_.packaged_always_hit_at_edge ? HitStatus::Hit : HitStatus::Hit1;
      out.level = ServingLevel::Regional;
    } else if (regional.access(e.content, e.size_bytes, now, ttl, cfg_.ttl_mode) == AccessResult::Hit) {
      record_node(regional_stats, true, e.size_bytes, counted);
      out.status = HitStatus::Hit1;
      out.level = ServingLevel::Regional;
    } else {
      record_node(regional_stats, false, e.size_bytes, counted);
      out.status = HitStatus::Miss;
      out.level = ServingLevel::Origin;
      count_evictions(regional_stats, regional.insert(e.content, e.size_bytes, now).size());
    }
    count_evictions(edge_stats, edge.insert(e.content, e.size_bytes, now).size());
  }
  if (client != nullptr && out.level != ServingLevel::Local) client->insert(e.content, e.size_bytes, now);

  out.latency_seconds = latency(out.level, e.size_bytes);

  if (counted) {
    edge_stats.expirations += edge.expirations() - edge_exp;
    regional_stats.expirations += regional.expirations() - regional_exp;
    summary_.statuses.add(out.status);
    summary_.bytes_total += e.size_bytes;
    if (out.level == ServingLevel::Origin) summary_.bytes_from_origin += e.size_bytes;
    ++summary_.events;
  }

  if (opts_.check_invariants) {
    for (const auto& n : edges_) {
      if (!n.check_invariants()) throw std::logic_error("edge capacity invariant violated at event " + std::to_string(index_));
    }
    for (const auto& n : regionals_) {
      if (!n.check_invariants()) {
        throw std::logic_error("regional capacity invariant violated at event " + std::to_string(index_));
      }
    }
  }
  ++index_;
  return out;
}

ReplayResult replay(std::span<const RequestEvent> events, const TopologyConfig& cfg, const ReplayOptions& opts) {
  HierarchySimulator sim(cfg, opts);
  ReplayResult result;
  result.outcomes.reserve(events.size());
  for (const auto& e : events) result.outcomes.push_back(sim.process(e));
  result.summary = sim.summary();
  return result;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json node_json(const NodeStats& s) {
  nlohmann::ordered_json j;
  j["requests"] = s.requests;
  j["hits"] = s.hits;
  j["misses"] = s.misses;
  j["hit_ratio"] = optional_json(s.hit_ratio());
  j["bytes_requested"] = s.bytes_requested;
  j["bytes_hit"] = s.bytes_hit;
  j["byte_hit_ratio"] = optional_json(s.byte_hit_ratio());
  j["inserts"] = s.inserts;
  j["evictions"] = s.evictions;
  j["expirations"] = s.expirations;
  return j;
}

}  // namespace

std::string ReplaySummary::to_json() const {
  nlohmann::ordered_json j;
  j["events"] = events;
  HitRateReport rates = hit_rate_report(statuses);
  j["statuses"] = {{"MISS", statuses.n_miss}, {"HIT", statuses.n_hit}, {"HIT1", statuses.n_hit1}, {"LOCAL", statuses.n_local}};
  j["edge_hit_rate"] = optional_json(rates.edge_rate);
  j["regional_hit_rate"] = optional_json(rates.regional_rate);
  j["system_hit_rate"] = optional_json(rates.system_rate);
  j["bytes_total"] = bytes_total;
  j["bytes_from_origin"] = bytes_from_origin;
  j["byte_hit_ratio"] = bytes_total == 0 ? nlohmann::ordered_json(nullptr)
                                         : nlohmann::ordered_json(1.0 - static_cast<double>(bytes_from_origin) /
                                                                           static_cast<double>(bytes_total));
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& n : edges) j["edges"].push_back(node_json(n));
  j["regionals"] = nlohmann::ordered_json::array();
  for (const auto& n : regionals) j["regionals"].push_back(node_json(n));
  return j.dump(2);
}

LogRecord to_log_record(const RequestEvent& e, const SimOutcome& o, std::int32_t utc_offset_minutes) {
  LogRecord r;
  r.latency_ms = std::llround(o.latency_seconds * 1000.0);
  if (auto ip = IpAddress::parse(e.client_ip)) r.client_ip = *ip;
  r.status = o.status;
  std::int64_t secs = e.time_ms / 1000;
  if (e.time_ms % 1000 < 0) --secs;
  r.timestamp = Timestamp::from_unix(secs, utc_offset_minutes);
  r.content_path = e.content;
  r.size_bytes = e.size_bytes;
  return r;
}

RequestEvent to_event(const ClassifiedRecord& r, const PatternConfig& cfg) {
  RequestEvent e;
  e.time_ms = r.record.timestamp.unix_seconds() * 1000;
  e.client_ip = r.record.client_ip.to_string();
  e.content = std::string(content_identity(r.record.content_path, cfg));
  e.size_bytes = r.record.size_bytes;
  e.service = r.service;
  e.packaged = r.packaging == PackagingClass::Packaged;
  return e;
}

// --- comparison ---

std::optional<double> AgreementReport::agreement() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(agreed) / static_cast<double>(total);
}

std::string AgreementReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["agreed"] = agreed;
  j["agreement"] = optional_json(agreement());
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (auto sim : kAllHitStatuses) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (auto logged : kAllHitStatuses) {
      row[std::string(to_wire(logged))] = confusion[static_cast<std::size_t>(sim)][static_cast<std::size_t>(logged)];
    }
    m[std::string(to_wire(sim))] = row;
  }
  j["confusion_simulated_by_logged"] = m;
  return j.dump(2);
}

AgreementReport compare(std::span<const HitStatus> simulated, std::span<const HitStatus> logged) {
  if (simulated.size() != logged.size()) {
    throw std::invalid_argument("compare: " + std::to_string(simulated.size()) + " simulated outcomes vs " +
                                std::to_string(logged.size()) + " logged statuses");
  }
  AgreementReport rep;
  for (std::size_t i = 0; i < simulated.size(); ++i) {
    ++rep.confusion[static_cast<std::size_t>(simulated[i])][static_cast<std::size_t>(logged[i])];
    if (simulated[i] == logged[i]) ++rep.agreed;
  }
  rep.total = simulated.size();
  return rep;
}

AgreementReport compare(std::span<const SimOutcome> simulated, std::span<const HitStatus> logged) {
  std::vector<HitStatus> statuses;
  statuses.reserve(simulated.size());
  for (const auto& o : simulated) statuses.push_back(o.status);
  return compare(std::span<const HitStatus>(statuses), logged);
}

// --- event CSV ---

void append_event_csv(std::string& out, const RequestEvent& e) {
  const std::string time = std::to_string(e.time_ms);
  const std::string size = std::to_string(e.size_bytes);
  csv_append_row(out, {time, e.client_ip, e.content, size, to_string(e.service), e.packaged ? "1" : "0"});
}

std::vector<RequestEvent> parse_event_csv(std::string_view text, const std::string& source_name) {
  std::vector<RequestEvent> events;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1 && line == kEventCsvHeader) continue;
    if (!csv_split(line, f) || f.size() != 6) {
      throw InputError(source_name, line_no, "expected time_unix_ms,ip,path,size,service,packaged");
    }
    RequestEvent e;
    try {
      std::size_t used = 0;
      e.time_ms = std::stoll(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("time");
      if (f[3].empty() || f[3].find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument("size");
      e.size_bytes = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw InputError(source_name, line_no, "bad time or size");
    }
    auto ip = IpAddress::parse(f[1]);
    if (!ip) throw InputError(source_name, line_no, "bad IP address '" + f[1] + "'");
    e.client_ip = ip->to_string();
    if (f[2].empty()) throw InputError(source_name, line_no, "empty path");
    e.content = std::move(f[2]);
    auto svc = parse_service_class(f[4]);
    if (!svc) throw InputError(source_name, line_no, "bad service '" + f[4] + "'");
    e.service = *svc;
    auto pkg = parse_packaging_class(f[5]);
    if (!pkg) throw InputError(source_name, line_no, "bad packaged flag '" + f[5] + "'");
    e.packaged = *pkg == PackagingClass::Packaged;
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<RequestEvent> load_event_csv(const std::filesystem::path& path) {
  std::string text;
  LineReader reader(path);
  std::string_view line;
  while (reader.next(line)) {
    text.append(line);
    text += '\n';
  }
  return parse_event_csv(text, path.string());
}

}  // namespace cdnlog
