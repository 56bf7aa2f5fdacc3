// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "cdnlog/classify.hpp"
#include "cdnlog/generate.hpp"
#include "cdnlog/geoip.hpp"
#include "cdnlog/logline.hpp"
#include "cdnlog/metrics.hpp"
#include "cdnlog/pipeline.hpp"
#include "cdnlog/simulate.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cdnlog;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? "" : " [failed]");
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// --- 1 ---
void parser_round_trip(Outcome& o) {
  auto t0 = Clock::now();
  oracle::Rng rng(101);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    LogRecord r = oracle::random_record(rng);
    auto parsed = parse_line(format_record(r));
    if (!std::holds_alternative<LogRecord>(parsed) || std::get<LogRecord>(parsed) != r) ++mismatches;
  }
  o.check(mismatches == 0, "100000 random records round-trip, " + std::to_string(mismatches) + " mismatches");

  std::vector<std::string_view> lines(fixtures::kSampleLines.begin(), fixtures::kSampleLines.end());
  auto c = clean_stream(std::span<const std::string_view>(lines));
  o.check(c.stats.accepted == 2 && c.stats.rejected == 2,
          "sample lines " + std::to_string(c.stats.accepted) + " accepted / " + std::to_string(c.stats.rejected) +
              " rejected");
  std::string reasons;
  for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
    if (auto n = c.stats.rejected_by_reason[i]) {
      reasons += (reasons.empty() ? "" : ",") + std::string(to_string(static_cast<RejectReason>(i))) + "=" +
                 std::to_string(n);
    }
  }
  o.check(c.stats.rejected_for(RejectReason::FieldCount) == 2, "rejections all field_count (got " + reasons + ")");
  double secs = seconds_since(t0);
  o.check(secs < 5.0, "runtime " + fmt(secs, 2) + " s");
}

// --- 2 ---
std::string corrupt(std::string line, std::uint64_t kind) {
  // Each corruption breaks exactly one field of a valid canonical line.
  auto fields_at = [&](std::size_t idx) {
    std::size_t start = 0;
    for (std::size_t k = 0; k < idx; ++k) {
      // The timestamp holds no ", ", so plain splitting is safe for canonical lines.
      start = line.find(", ", start) + 2;
    }
    std::size_t end = line.find(", ", start);
    return std::pair{start, end == std::string::npos ? line.size() : end};
  };
  auto replace_field = [&](std::size_t idx, const std::string& v) {
    auto [s, e] = fields_at(idx);
    line.replace(s, e - s, v);
  };
  switch (kind % 7) {
    case 0: return line.substr(0, line.rfind(", "));  // drop the size field
    case 1: replace_field(0, "-0.5"); return line;
    case 2: replace_field(1, "300.1.1.1"); return line;
    case 3: replace_field(2, "OK"); return line;
    case 4: replace_field(3, "[32/Dec/2018:00:00:00 +0700]"); return line;
    case 5: replace_field(5, "12kb"); return line;
    default: replace_field(4, ""); return line;
  }
}

void injection_accounting(Outcome& o) {
  oracle::Rng rng(102);
  const std::size_t total = 1'000'000, bad = 1000;
  std::set<std::size_t> positions;
  while (positions.size() < bad) positions.insert(rng() % total);
  std::vector<std::string> lines;
  lines.reserve(total);
  std::uint64_t kind = 0;
  for (std::size_t i = 0; i < total; ++i) {
    std::string line = format_record(oracle::random_record(rng));
    if (positions.count(i)) line = corrupt(std::move(line), kind++);
    lines.push_back(std::move(line));
  }
  auto c = clean_stream(std::span<const std::string>(lines));
  o.check(c.stats.rejected == bad, "rejected " + std::to_string(c.stats.rejected) + " of " + std::to_string(total) +
                                       " lines with " + std::to_string(bad) + " injected");
  o.check(c.stats.accepted == total - bad, "accepted " + std::to_string(c.stats.accepted));
}

// --- 3 ---
void hit_rate_algebra(Outcome& o) {
  oracle::Rng rng(103);
  std::size_t identity_fail = 0, oracle_fail = 0;
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    // Status lists of random length and skew, including empty and all-LOCAL ones.
    std::vector<HitStatus> statuses(rng() % 200);
    std::uint64_t skew = rng() % 4;
    for (auto& s : statuses) s = kAllHitStatuses[rng() % 3 == 0 ? skew : rng() % 4];
    HitCounts c;
    for (auto s : statuses) c.add(s);
    auto r = hit_rate_report(c);
    auto n = oracle::naive_rates(statuses);
    if (r.edge_rate != n.edge || r.regional_rate != n.regional || r.system_rate != n.system) ++oracle_fail;
    if (r.edge_rate && r.regional_rate) {
      double err = std::abs(*r.system_rate - (*r.edge_rate + (1 - *r.edge_rate) * *r.regional_rate));
      worst = std::max(worst, err);
      if (err > 1e-12) ++identity_fail;
    }
  }
  char worst_text[32];
  std::snprintf(worst_text, sizeof(worst_text), "%.3e", worst);
  o.check(identity_fail == 0, std::string("identity max error ") + worst_text);
  o.check(oracle_fail == 0, std::to_string(oracle_fail) + " reports differ from counting oracle");
}

// --- 4 ---
void lru_oracle(Outcome& o) {
  oracle::Rng rng(104);
  std::size_t bad_traces = 0;
  for (int trace = 0; trace < 200; ++trace) {
    const std::uint64_t cap = 1 + rng() % 10;
    const std::uint64_t ttl = trace % 2 ? 0 : 1 + rng() % 30;
    const std::size_t n = 1 + rng() % 1000;
    const std::size_t objects = 2 + rng() % 30;

    // Single node, insert on miss.
    CacheNode fast(cap);
    oracle::NaiveLru slow(cap);
    // Full hierarchy reduced to one edge and one regional.
    TopologyConfig topo;
    topo.n_edges = topo.n_regionals = 1;
    topo.edge_capacity_bytes = cap;
    topo.regional_capacity_bytes = 1 + rng() % 10;
    for (auto& [s, v] : topo.ttl_by_service) v = ttl;
    std::vector<RequestEvent> events;
    std::vector<bool> node_fast, node_slow;
    std::int64_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t += static_cast<std::int64_t>(rng() % 8000);
      std::string id = "/o" + std::to_string(rng() % objects);
      bool a = fast.access(id, 1, t, ttl) == AccessResult::Hit;
      bool b = slow.access(id, 1, t, ttl);
      if (!a) fast.insert(id, 1, t);
      if (!b) slow.insert(id, 1, t);
      node_fast.push_back(a);
      node_slow.push_back(b);
      RequestEvent e;
      e.time_ms = t;
      e.client_ip = "10.0.0.1";
      e.content = id;
      e.size_bytes = 1;
      events.push_back(e);
    }
    auto sim = replay(events, topo);
    auto ref = oracle::naive_two_level(events, topo.edge_capacity_bytes, topo.regional_capacity_bytes, ttl);
    bool same = node_fast == node_slow;
    for (std::size_t i = 0; same && i < n; ++i) same = sim.outcomes[i].status == ref[i];
    if (!same) ++bad_traces;
  }
  o.check(bad_traces == 0, "200 traces, " + std::to_string(bad_traces) + " differ from the reference LRU");

  CacheNode node(10);
  node.insert("x", 1, 0);
  bool miss = node.access("x", 1, 61'000, 60) == AccessResult::Miss;
  o.check(miss, "insert t=0, ttl=60, access t=61 -> MISS");
}

// --- 5 ---
void hierarchy_invariants(Outcome& o) {
  oracle::Rng rng(105);
  TopologyConfig topo;
  topo.edge_capacity_bytes = 2'000'000;
  topo.regional_capacity_bytes = 8'000'000;
  topo.ttl_by_service[ServiceClass::LiveStreaming] = 30;
  topo.ttl_by_service[ServiceClass::Website] = 600;
  std::vector<RequestEvent> events;
  std::int64_t t = 0;
  for (int i = 0; i < 100000; ++i) {
    t += static_cast<std::int64_t>(rng() % 1000);
    RequestEvent e;
    e.time_ms = t;
    e.client_ip = "10.0." + std::to_string(rng() % 8) + "." + std::to_string(rng() % 250);
    std::uint64_t id = rng() % 5000;
    e.content = "/c" + std::to_string(id);
    e.size_bytes = 1 + mix64(id) % 400'000;
    e.service = static_cast<ServiceClass>(id % 3);
    e.packaged = id % 5 == 0;
    events.push_back(std::move(e));
  }
  ReplayOptions opts;
  opts.check_invariants = true;
  std::string violation;
  ReplayResult r;
  try {
    r = replay(events, topo, opts);
  } catch (const std::logic_error& e) {
    violation = e.what();
  }
  o.check(violation.empty(), violation.empty() ? "capacity invariant held after every event" : violation);
  if (!violation.empty()) return;
  std::size_t packaged_miss = 0, first_not_miss = 0, firsts = 0;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].packaged && r.outcomes[i].status == HitStatus::Miss) ++packaged_miss;
    if (!events[i].packaged && seen.insert(events[i].content).second) {
      ++firsts;
      if (r.outcomes[i].status != HitStatus::Miss) ++first_not_miss;
    }
  }
  o.check(packaged_miss == 0, std::to_string(packaged_miss) + " packaged MISS");
  o.check(first_not_miss == 0,
          std::to_string(first_not_miss) + " of " + std::to_string(firsts) + " cold first requests not MISS");
}

// --- 6 ---
void classifier_recovery(Outcome& o) {
  auto wl = WorkloadConfig::defaults();
  wl.requests_per_day = 200000;
  auto trace = gen_trace(wl);
  TopologyConfig topo;
  auto sim = replay(trace.events, topo);
  std::vector<LogRecord> records;
  records.reserve(trace.events.size());
  std::size_t parse_fail = 0;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    auto parsed = parse_line(format_record(to_log_record(trace.events[i], sim.outcomes[i], 420)));
    if (auto* r = std::get_if<LogRecord>(&parsed)) records.push_back(*r);
    else ++parse_fail;
  }
  o.check(parse_fail == 0, std::to_string(parse_fail) + " simulated lines failed to parse");
  auto cls = classify_stream(std::move(records));
  std::size_t pkg_err = 0, svc_err = 0;
  for (std::size_t i = 0; i < cls.records.size(); ++i) {
    const auto& info = trace.ledger.contents.at(cls.records[i].record.content_path);
    if ((cls.records[i].packaging == PackagingClass::Packaged) != is_packaged(info.cls)) ++pkg_err;
    if (cls.records[i].service != service_of(info.cls)) ++svc_err;
  }
  o.check(pkg_err == 0, std::to_string(pkg_err) + " packaging errors in " + std::to_string(cls.records.size()));
  o.check(svc_err == 0, std::to_string(svc_err) + " service errors");
}

// --- 7 ---
void generator_fits(Outcome& o) {
  ZipfDistribution z(1000, 0.8);
  Rng rng(107);
  std::vector<std::uint64_t> counts(1001);
  for (int i = 0; i < 1'000'000; ++i) ++counts[z(rng)];
  double l1 = 0;
  for (std::uint64_t k = 1; k <= 1000; ++k) l1 += std::abs(static_cast<double>(counts[k]) / 1e6 - z.pmf(k));
  o.check(l1 < 0.01, "Zipf L1 " + fmt(l1) + " (< 0.01 required)");

  const double target[] = {0.03936665, 0.075, 0.12234965};
  auto wl = WorkloadConfig::defaults();
  const auto& live = wl.classes[static_cast<std::size_t>(TrafficClass::LiveNonPackaged)].size_mb;
  std::vector<std::int64_t> sizes(1'000'000);
  for (auto& s : sizes) s = static_cast<std::int64_t>(std::llround(sample_lognormal(live, rng) * 1e6));
  auto summary = summarize(sizes, 1e6);
  double qs[] = {summary.q1, summary.median, summary.q3};
  double worst = 0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(qs[i] - target[i]) / target[i]);
  o.check(worst < 0.10, "live quartiles " + fmt(qs[0], 5) + "/" + fmt(qs[1], 5) + "/" + fmt(qs[2], 5) +
                            " MB, worst deviation " + fmt(100 * worst, 2) + "%");

  wl.requests_per_day = 100000;
  auto a = gen_trace(wl);
  std::array<std::uint64_t, 24> by_hour{};
  for (const auto& e : a.events) {
    std::int64_t local = e.time_ms / 1000 + std::int64_t{wl.utc_offset_minutes} * 60;
    ++by_hour[static_cast<std::size_t>(((local % 86400) + 86400) % 86400 / 3600)];
  }
  auto peak = std::max_element(by_hour.begin(), by_hour.end()) - by_hour.begin();
  o.check(peak >= 19 && peak <= 21, "diurnal peak hour " + std::to_string(peak));
  auto b = gen_trace(wl);
  bool same = events_to_csv(a.events) == events_to_csv(b.events) && a.ledger.to_json() == b.ledger.to_json() &&
              a.geo_table_csv == b.geo_table_csv;
  o.check(same, "same-seed runs byte-identical");
}

// --- 8 ---
void metrics_oracle(Outcome& o) {
  oracle::Rng rng(108);
  std::vector<std::int64_t> values(100000);
  for (auto& v : values) v = static_cast<std::int64_t>(rng() % 5'000'000) * (rng() % 100 == 0 ? 20 : 1);
  auto expected = oracle::sorted_summary(values, 1000.0);
  ValueCollector collector;
  for (auto v : values) collector.add(v);
  o.check(collector.summary(1000.0) == expected, "latency five-number summary equals sort oracle");

  std::vector<ClassifiedRecord> recs(100000);
  for (auto& r : recs) {
    r.record = oracle::random_record(rng);
    r.service = static_cast<ServiceClass>(rng() % 3);
    r.packaging = static_cast<PackagingClass>(rng() % 2);
  }
  std::vector<std::int64_t> web;
  for (const auto& r : recs)
    if (r.service == ServiceClass::Website) web.push_back(static_cast<std::int64_t>(r.record.size_bytes));
  o.check(size_distribution(recs).at(ServiceClass::Website) == oracle::sorted_summary(web, 1e6),
          "size summary equals sort oracle");

  std::vector<GeoInfo> geos{{"FPT", "Hanoi", "Vietnam"}, {"VNPT", "Ho Chi Minh", "Vietnam"}, {"Viettel", "Hue", "Vietnam"}};
  ReportOptions opts;
  opts.groups = {GroupKey::All, GroupKey::Service, GroupKey::Isp, GroupKey::Province, GroupKey::Country, GroupKey::Hour};
  ReportBuilder single(opts);
  std::vector<ReportBuilder> shards(4, ReportBuilder(opts));
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const GeoInfo* g = i % 7 == 0 ? nullptr : &geos[i % 3];
    single.add(recs[i], g);
    shards[(i * 2654435761u) % 4].add(recs[i], g);
  }
  ReportBuilder merged(opts);
  for (auto& s : shards) merged.merge(s);
  o.check(merged.finish() == single.finish(), "4-way sharded report equals single pass");
}

// --- 9 ---
class CountingTable : public Resolver {
 public:
  int calls = 0;
  ResolveResult resolve(const IpAddress& ip) override {
    ++calls;
    auto v = ip.to_string();
    if (v.back() == '7') return GeoInfo{"X", "", "Vietnam"};  // normalizes to Invalid
    return GeoInfo{"FPT", "HCMC", "Vietnam"};
  }
};

void geo_cache_contract(Outcome& o) {
  CountingTable resolver;
  GeoNormalizer norm;
  norm.synonyms.add("HCMC", "Ho Chi Minh");
  GeoCache cache;
  oracle::Rng rng(109);
  std::vector<IpAddress> ips;
  for (int i = 0; i < 100; ++i) ips.push_back(*IpAddress::parse("100.64.0." + std::to_string(i + 1)));
  for (int i = 0; i < 1000; ++i) lookup(ips[i < 100 ? i : rng() % 100], cache, resolver, norm);
  o.check(resolver.calls == 100, std::to_string(resolver.calls) + " resolver calls for 1000 lookups over 100 IPs");

  auto dir = fs::temp_directory_path() / ("cdnlog_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  save_cache(cache, dir / "geo_cache.csv");
  GeoCache back = load_cache(dir / "geo_cache.csv");
  fs::remove_all(dir);
  o.check(back == cache, "cache file round-trip lossless (" + std::to_string(cache.size()) + " entries)");
  std::size_t invalid = 0, kept_invalid = 0;
  for (const auto& ip : ips) {
    auto entry = cache.find(ip);
    if (entry && !*entry) {
      ++invalid;
      auto again = back.find(ip);
      if (again && !*again) ++kept_invalid;
    }
  }
  o.check(invalid > 0 && kept_invalid == invalid,
          std::to_string(kept_invalid) + "/" + std::to_string(invalid) + " Invalid entries persist as Invalid");
}

// --- 10 ---
void throughput(Outcome& o) {
  // Realistic text: a generated trace replayed into log lines.
  auto wl = WorkloadConfig::defaults();
  wl.requests_per_day = 400000;
  auto trace = gen_trace(wl);
  auto sim = replay(trace.events, TopologyConfig{});
  std::string text;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    append_record(text, to_log_record(trace.events[i], sim.outcomes[i], 420));
    text += '\n';
  }
  std::string corpus;
  while (corpus.size() < (256u << 20)) corpus += text;

  auto dir = fs::temp_directory_path() / ("cdnlog_tput_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::FILE* f = std::fopen((dir / "in.log").c_str(), "wb");
    std::fwrite(corpus.data(), 1, corpus.size(), f);
    std::fclose(f);
  }
  const double mb = static_cast<double>(corpus.size()) / 1e6;
  corpus.clear();
  corpus.shrink_to_fit();

  // The two commands as a user runs them, file to file, one thread.
  auto t0 = Clock::now();
  cmd_clean({dir / "in.log"}, dir / "clean");
  cmd_classify({dir / "clean" / "clean.log"}, PatternConfig{}, dir / "classify");
  double secs = seconds_since(t0);
  fs::remove_all(dir);
  double rate = mb / secs;
  o.check(rate >= 50.0, fmt(mb, 0) + " MB in " + fmt(secs, 2) + " s on 1 thread = " + fmt(rate, 1) + " MB/s (>= 50)");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "parser round-trip", parser_round_trip},
      {2, "malformed-injection accounting", injection_accounting},
      {3, "hit-rate algebra", hit_rate_algebra},
      {4, "LRU oracle equivalence", lru_oracle},
      {5, "hierarchy invariants", hierarchy_invariants},
      {6, "classifier recovery", classifier_recovery},
      {7, "generator distribution fits", generator_fits},
      {8, "metrics oracle equivalence", metrics_oracle},
      {9, "geo cache contract", geo_cache_contract},
      {10, "throughput", throughput},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
