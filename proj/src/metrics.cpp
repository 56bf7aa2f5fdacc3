#include "cdnlog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace cdnlog {

// --- hit rates ---

void HitCounts::add(HitStatus s) {
  switch (s) {
    case HitStatus::Miss: ++n_miss; break;
    case HitStatus::Hit: ++n_hit; break;
    case HitStatus::Hit1: ++n_hit1; break;
    case HitStatus::Local: ++n_local; break;
  }
}

HitCounts& HitCounts::operator+=(const HitCounts& o) {
  n_miss += o.n_miss;
  n_hit += o.n_hit;
  n_hit1 += o.n_hit1;
  n_local += o.n_local;
  return *this;
}

HitRateReport hit_rate_report(const HitCounts& counts, bool include_local_in_system) {
  HitRateReport r;
  r.counts = counts;
  const auto c = static_cast<double>(counts.cdn_requests());
  if (counts.cdn_requests() > 0) r.edge_rate = static_cast<double>(counts.n_hit) / c;
  if (counts.n_hit1 + counts.n_miss > 0) {
    r.regional_rate = static_cast<double>(counts.n_hit1) / static_cast<double>(counts.n_hit1 + counts.n_miss);
  }
  if (include_local_in_system) {
    std::uint64_t denom = counts.cdn_requests() + counts.n_local;
    if (denom > 0) {
      r.system_rate = static_cast<double>(counts.n_hit + counts.n_hit1 + counts.n_local) / static_cast<double>(denom);
    }
  } else if (counts.cdn_requests() > 0) {
    r.system_rate = static_cast<double>(counts.n_hit + counts.n_hit1) / c;
  }
  return r;
}

// --- quantiles ---

double quantile_sorted(std::span<const std::int64_t> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  const auto x0 = static_cast<double>(sorted[lo]);
  if (frac == 0.0 || lo + 1 >= sorted.size()) return x0;
  return x0 + frac * (static_cast<double>(sorted[lo + 1]) - x0);
}

FiveNumberSummary summarize(std::vector<std::int64_t>& values, double divisor) {
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("summary of an empty set");
  FiveNumberSummary s;
  s.count = n;

  // Select just the order statistics the quartiles need instead of sorting.
  std::vector<std::size_t> ranks;
  for (double p : {0.25, 0.5, 0.75}) {
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    ranks.push_back(lo);
    if (lo + 1 < n) ranks.push_back(lo + 1);
  }
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  auto first = values.begin();
  for (std::size_t k : ranks) {
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(k);
    if (nth >= first) std::nth_element(first, nth, values.end());
    first = nth + 1;
  }
  auto q = [&](double p) {
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    const auto x0 = static_cast<double>(values[lo]);
    if (frac == 0.0 || lo + 1 >= n) return x0;
    return x0 + frac * (static_cast<double>(values[lo + 1]) - x0);
  };
  const double q1 = q(0.25);
  const double median = q(0.5);
  const double q3 = q(0.75);
  const double iqr = q3 - q1;
  const double lo_fence = q1 - 1.5 * iqr;
  const double hi_fence = q3 + 1.5 * iqr;

  // Some data point always lies within the fences, so both get assigned.
  std::int64_t lower = std::numeric_limits<std::int64_t>::max();
  std::int64_t upper = std::numeric_limits<std::int64_t>::min();
  __int128 sum = 0;
  for (std::int64_t v : values) {
    const auto d = static_cast<double>(v);
    if (d >= lo_fence && v < lower) lower = v;
    if (d <= hi_fence && v > upper) upper = v;
    sum += v;
  }
  s.q1 = q1 / divisor;
  s.median = median / divisor;
  s.q3 = q3 / divisor;
  s.lower_whisker = static_cast<double>(lower) / divisor;
  s.upper_whisker = static_cast<double>(upper) / divisor;
  s.mean = static_cast<double>(sum) / static_cast<double>(n) / divisor;
  return s;
}

ValueCollector::ValueCollector(std::size_t exact_limit, std::size_t reservoir_size)
    : exact_limit_(exact_limit), reservoir_size_(std::min(reservoir_size, exact_limit)) {}

std::uint64_t ValueCollector::next_random() {
  // xorshift64*
  rng_state_ ^= rng_state_ >> 12;
  rng_state_ ^= rng_state_ << 25;
  rng_state_ ^= rng_state_ >> 27;
  return rng_state_ * 0x2545f4914f6cdd1dull;
}

void ValueCollector::to_reservoir() {
  // Partial Fisher-Yates down to reservoir_size_.
  for (std::size_t i = 0; i < reservoir_size_; ++i) {
    std::size_t j = i + static_cast<std::size_t>(next_random() % (values_.size() - i));
    std::swap(values_[i], values_[j]);
  }
  values_.resize(reservoir_size_);
  values_.shrink_to_fit();
  approximate_ = true;
}

void ValueCollector::add(std::int64_t v) {
  ++count_;
  sum_ += v;
  if (!approximate_) {
    values_.push_back(v);
    if (values_.size() > exact_limit_) to_reservoir();
    return;
  }
  // Algorithm R: keep the new value with probability k / count.
  std::uint64_t j = next_random() % count_;
  if (j < reservoir_size_) values_[j] = v;
}

void ValueCollector::merge(const ValueCollector& other) {
  if (!approximate_ && !other.approximate_ && values_.size() + other.values_.size() <= exact_limit_) {
    values_.insert(values_.end(), other.values_.begin(), other.values_.end());
    count_ += other.count_;
    sum_ += other.sum_;
    return;
  }
  // Weighted merge of two samples: draw from each side in proportion to the
  // number of observations it represents.
  const std::uint64_t total = count_ + other.count_;
  const auto take_mine = static_cast<std::size_t>(
      std::llround(static_cast<double>(reservoir_size_) * static_cast<double>(count_) / static_cast<double>(total)));
  auto pick = [&](std::vector<std::int64_t> pool, std::size_t k, std::vector<std::int64_t>& out) {
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(next_random() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  };
  std::vector<std::int64_t> merged;
  merged.reserve(reservoir_size_);
  pick(values_, take_mine, merged);
  pick(other.values_, reservoir_size_ - std::min(take_mine, reservoir_size_), merged);
  values_ = std::move(merged);
  count_ = total;
  sum_ += other.sum_;
  approximate_ = true;
}

FiveNumberSummary ValueCollector::summary(double divisor) const {
  std::vector<std::int64_t> copy = values_;
  FiveNumberSummary s = summarize(copy, divisor);
  s.count = count_;
  s.mean = static_cast<double>(sum_) / static_cast<double>(count_) / divisor;
  s.approximate = approximate_;
  return s;
}

// --- grouping ---

std::string_view to_string(GroupKey k) {
  switch (k) {
    case GroupKey::All: return "all";
    case GroupKey::Service: return "service";
    case GroupKey::Isp: return "isp";
    case GroupKey::Province: return "province";
    case GroupKey::Country: return "country";
    case GroupKey::Hour: return "hour";
  }
  return "?";
}

std::optional<GroupKey> parse_group_key(std::string_view s) {
  for (auto k : {GroupKey::All, GroupKey::Service, GroupKey::Isp, GroupKey::Province, GroupKey::Country, GroupKey::Hour}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string hour_label(std::int64_t local_hour_start, std::int32_t utc_offset_minutes) {
  CivilTime c = civil_from_local_seconds(local_hour_start);
  int off = utc_offset_minutes < 0 ? -utc_offset_minutes : utc_offset_minutes;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:00 %c%02d%02d", c.year, c.month, c.day, c.hour,
                utc_offset_minutes < 0 ? '-' : '+', off / 60, off % 60);
  return buf;
}

namespace {

std::int64_t hour_floor(std::int64_t local_seconds) {
  std::int64_t h = local_seconds / 3600;
  if (local_seconds % 3600 < 0) --h;
  return h * 3600;
}

}  // namespace

std::string group_label(const ClassifiedRecord& r, const GeoInfo* geo, GroupKey key) {
  switch (key) {
    case GroupKey::All: return "all";
    case GroupKey::Service: return std::string(to_string(r.service));
    case GroupKey::Isp: return geo ? geo->isp : "unknown";
    case GroupKey::Province: return geo ? geo->province : "unknown";
    case GroupKey::Country: return geo ? geo->country : "unknown";
    case GroupKey::Hour:
      return hour_label(hour_floor(r.record.timestamp.local_seconds), r.record.timestamp.utc_offset_minutes);
  }
  return "?";
}

void HitRateAggregator::add(const ClassifiedRecord& r, const GeoInfo* geo) {
  if (key_ == GroupKey::All) {
    counts_["all"].add(r.record.status);
    return;
  }
  counts_[group_label(r, geo, key_)].add(r.record.status);
}

void HitRateAggregator::merge(const HitRateAggregator& other) {
  for (const auto& [label, c] : other.counts_) counts_[label] += c;
}

std::map<std::string, HitRateReport> HitRateAggregator::reports(bool include_local_in_system) const {
  std::map<std::string, HitRateReport> out;
  for (const auto& [label, c] : counts_) out.emplace(label, hit_rate_report(c, include_local_in_system));
  return out;
}

ValueCollector& LatencyAggregator::slot(const std::string& label) {
  auto it = values_.find(label);
  if (it == values_.end()) it = values_.emplace(label, ValueCollector(exact_limit_, reservoir_size_)).first;
  return it->second;
}

void LatencyAggregator::add(const ClassifiedRecord& r, const GeoInfo* geo) {
  slot(key_ == GroupKey::All ? std::string("all") : group_label(r, geo, key_)).add(r.record.latency_ms);
}

void LatencyAggregator::merge(const LatencyAggregator& other) {
  for (const auto& [label, v] : other.values_) slot(label).merge(v);
}

std::map<std::string, LatencySummary> LatencyAggregator::summaries() const {
  std::map<std::string, LatencySummary> out;
  for (const auto& [label, v] : values_) {
    if (v.count() > 0) out.emplace(label, v.summary(1000.0));
  }
  return out;
}

// --- time series ---

double TimeSeriesBucket::mean_latency_seconds() const {
  return request_count == 0 ? 0.0 : latency_sum_seconds() / static_cast<double>(request_count);
}

void TimeSeriesAggregator::add(const LogRecord& r) {
  const std::int64_t start = hour_floor(r.timestamp.local_seconds);
  const std::int32_t off = r.timestamp.utc_offset_minutes;
  const std::int64_t unix_start = start - std::int64_t{off} * 60;
  auto [it, inserted] = buckets_.try_emplace({unix_start, off});
  TimeSeriesBucket& b = it->second;
  if (inserted) {
    b.bucket_start = start;
    b.utc_offset_minutes = off;
  }
  ++b.request_count;
  b.total_bytes += r.size_bytes;
  b.latency_sum_ms += r.latency_ms;
  b.hits.add(r.status);
}

void TimeSeriesAggregator::merge(const TimeSeriesAggregator& other) {
  for (const auto& [key, src] : other.buckets_) {
    auto [it, inserted] = buckets_.try_emplace(key, src);
    if (inserted) continue;
    TimeSeriesBucket& b = it->second;
    b.request_count += src.request_count;
    b.total_bytes += src.total_bytes;
    b.latency_sum_ms += src.latency_sum_ms;
    b.hits += src.hits;
  }
}

std::vector<TimeSeriesBucket> TimeSeriesAggregator::buckets() const {
  std::vector<TimeSeriesBucket> out;
  out.reserve(buckets_.size());
  for (const auto& [key, b] : buckets_) out.push_back(b);
  return out;
}

std::vector<TimeSeriesBucket> time_series(std::span<const LogRecord> records) {
  TimeSeriesAggregator agg;
  for (const auto& r : records) agg.add(r);
  return agg.buckets();
}

// --- MIME ---

std::string_view to_string(MimeClass m) {
  switch (m) {
    case MimeClass::M3u8: return "m3u8";
    case MimeClass::Mpd: return "mpd";
    case MimeClass::Ts: return "ts";
    case MimeClass::Dash: return "dash";
    case MimeClass::Mp3: return "mp3";
    case MimeClass::Mp4: return "mp4";
    case MimeClass::Image: return "image";
    case MimeClass::Other: return "other";
  }
  return "?";
}

MimeClass mime_class_of(std::string_view path) {
  const std::string ext = extension_of(path);
  if (ext == ".m3u8") return MimeClass::M3u8;
  if (ext == ".mpd") return MimeClass::Mpd;
  if (ext == ".ts") return MimeClass::Ts;
  if (ext == ".dash") return MimeClass::Dash;
  if (ext == ".mp3") return MimeClass::Mp3;
  if (ext == ".mp4") return MimeClass::Mp4;
  for (std::string_view img : {".jpg", ".jpeg", ".png", ".gif", ".webp", ".svg", ".ico", ".bmp"}) {
    if (ext == img) return MimeClass::Image;
  }
  return MimeClass::Other;
}

void MimeTally::add(const LogRecord& r) {
  auto i = static_cast<std::size_t>(mime_class_of(r.content_path));
  ++requests[i];
  bytes[i] += r.size_bytes;
}

MimeTally& MimeTally::operator+=(const MimeTally& o) {
  for (std::size_t i = 0; i < kMimeClassCount; ++i) {
    requests[i] += o.requests[i];
    bytes[i] += o.bytes[i];
  }
  return *this;
}

MimeBreakdown mime_breakdown(const MimeTally& tally) {
  MimeBreakdown b;
  b.tally = tally;
  std::uint64_t total_requests = 0;
  std::uint64_t total_bytes = 0;
  for (std::size_t i = 0; i < kMimeClassCount; ++i) {
    total_requests += tally.requests[i];
    total_bytes += tally.bytes[i];
  }
  for (std::size_t i = 0; i < kMimeClassCount; ++i) {
    if (total_requests > 0) {
      b.request_fraction[i] = static_cast<double>(tally.requests[i]) / static_cast<double>(total_requests);
    }
    if (total_bytes > 0) b.byte_fraction[i] = static_cast<double>(tally.bytes[i]) / static_cast<double>(total_bytes);
  }
  return b;
}

MimeBreakdown mime_breakdown(std::span<const LogRecord> records) {
  MimeTally t;
  for (const auto& r : records) t.add(r);
  return mime_breakdown(t);
}

// --- sizes ---

void SizeAggregator::add(const ClassifiedRecord& r) {
  auto it = values_.find(r.service);
  if (it == values_.end()) it = values_.emplace(r.service, ValueCollector(exact_limit_, reservoir_size_)).first;
  it->second.add(static_cast<std::int64_t>(r.record.size_bytes));
}

void SizeAggregator::merge(const SizeAggregator& other) {
  for (const auto& [svc, v] : other.values_) {
    auto it = values_.find(svc);
    if (it == values_.end()) {
      values_.emplace(svc, v);
    } else {
      it->second.merge(v);
    }
  }
}

SizeDistribution SizeAggregator::distribution() const {
  SizeDistribution out;
  for (const auto& [svc, v] : values_) {
    if (v.count() > 0) out.emplace(svc, v.summary(1e6));
  }
  return out;
}

// --- convenience ---

std::map<std::string, HitRateReport> hit_rates(std::span<const EnrichedRecord> records, GroupKey key,
                                               bool include_local_in_system) {
  HitRateAggregator agg(key);
  for (const auto& r : records) agg.add(r.classified, r.geo ? &*r.geo : nullptr);
  return agg.reports(include_local_in_system);
}

std::map<std::string, HitRateReport> hit_rates(std::span<const ClassifiedRecord> records, GroupKey key,
                                               bool include_local_in_system) {
  HitRateAggregator agg(key);
  for (const auto& r : records) agg.add(r);
  return agg.reports(include_local_in_system);
}

std::map<std::string, LatencySummary> latency_summary(std::span<const EnrichedRecord> records, GroupKey key) {
  LatencyAggregator agg(key);
  for (const auto& r : records) agg.add(r.classified, r.geo ? &*r.geo : nullptr);
  return agg.summaries();
}

std::map<std::string, LatencySummary> latency_summary(std::span<const ClassifiedRecord> records, GroupKey key) {
  LatencyAggregator agg(key);
  for (const auto& r : records) agg.add(r);
  return agg.summaries();
}

SizeDistribution size_distribution(std::span<const ClassifiedRecord> records) {
  SizeAggregator agg;
  for (const auto& r : records) agg.add(r);
  return agg.distribution();
}

// --- report bundle ---

ReportBuilder::ReportBuilder(ReportOptions opts)
    : opts_(std::move(opts)), sizes_(opts_.exact_quantile_limit, opts_.reservoir_size) {
  for (GroupKey k : opts_.groups) {
    hit_.emplace_back(k);
    latency_.emplace_back(k, opts_.exact_quantile_limit, opts_.reservoir_size);
  }
}

void ReportBuilder::add(const ClassifiedRecord& r, const GeoInfo* geo) {
  for (auto& h : hit_) h.add(r, geo);
  for (auto& l : latency_) l.add(r, geo);
  series_.add(r.record);
  series_by_service_[r.service].add(r.record);
  mime_.add(r.record);
  sizes_.add(r);
  class_counts_.add(r.service, r.packaging);
  ++records_;
}

void ReportBuilder::merge(const ReportBuilder& other) {
  for (std::size_t i = 0; i < hit_.size(); ++i) hit_[i].merge(other.hit_[i]);
  for (std::size_t i = 0; i < latency_.size(); ++i) latency_[i].merge(other.latency_[i]);
  series_.merge(other.series_);
  for (const auto& [svc, agg] : other.series_by_service_) series_by_service_[svc].merge(agg);
  mime_ += other.mime_;
  sizes_.merge(other.sizes_);
  class_counts_ += other.class_counts_;
  records_ += other.records_;
}

Report ReportBuilder::finish() const {
  Report rep;
  for (std::size_t i = 0; i < opts_.groups.size(); ++i) {
    rep.hit_rates[opts_.groups[i]] = hit_[i].reports(opts_.include_local_in_system);
    rep.latency[opts_.groups[i]] = latency_[i].summaries();
  }
  rep.time_series = series_.buckets();
  for (const auto& [svc, agg] : series_by_service_) rep.time_series_by_service[svc] = agg.buckets();
  rep.mime = mime_breakdown(mime_);
  rep.sizes = sizes_.distribution();
  rep.class_counts = class_counts_;
  rep.records = records_;
  return rep;
}

}  // namespace cdnlog
