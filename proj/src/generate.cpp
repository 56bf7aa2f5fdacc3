#include "cdnlog/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "cdnlog/errors.hpp"
#include "cdnlog/hash.hpp"
#include "cdnlog/metrics.hpp"

namespace cdnlog {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::int64_t kHourMs = 3'600'000;
// Website sizes follow a very wide log-normal; keep single objects sane.
constexpr std::uint64_t kMaxObjectBytes = 4'000'000'000ull;

std::size_t pick_weighted(std::span<const double> cumulative, double u) {
  double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  auto idx = static_cast<std::size_t>(it - cumulative.begin());
  return std::min(idx, cumulative.size() - 1);
}

std::vector<double> cumulative_of(std::span<const double> weights) {
  std::vector<double> c(weights.size());
  std::partial_sum(weights.begin(), weights.end(), c.begin());
  return c;
}

std::string asset_path(TrafficClass cls, std::uint64_t rank, std::string_view ext) {
  std::string r = std::to_string(rank);
  switch (cls) {
    case TrafficClass::LiveNonPackaged: return "/live/ch" + r + "/media" + std::string(ext);
    case TrafficClass::LivePackaged: return "/live/pkg/ch" + r + "/media" + std::string(ext);
    case TrafficClass::VodNonPackaged: return "/vod/m" + r + "/chunk" + std::string(ext);
    case TrafficClass::WebsiteNonPackaged: return "/static/s" + r + "/asset" + std::string(ext);
  }
  return {};
}

}  // namespace

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) {
  // Box-Muller; the second variate is discarded to keep the stream simple.
  double u1 = 1.0 - uniform01(rng);  // (0, 1]
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

LogNormalParams fit_lognormal(double q1, double median, double q3) {
  if (!(q1 > 0 && q1 < median && median < q3)) {
    throw std::invalid_argument("fit_lognormal requires 0 < q1 < median < q3");
  }
  return {std::log(median), (std::log(q3) - std::log(q1)) / (2.0 * kQuartileZ)};
}

double sample_lognormal(const LogNormalParams& p, Rng& rng) { return std::exp(p.mu + p.sigma * standard_normal(rng)); }

ZipfDistribution::ZipfDistribution(std::uint64_t n, double s) : n_(n), s_(s) {
  if (n < 1) throw std::invalid_argument("zipf: n must be >= 1");
  if (!(s >= 0)) throw std::invalid_argument("zipf: exponent must be >= 0");
  cdf_.resize(n);
  double acc = 0;
  for (std::uint64_t k = 1; k <= n; ++k) {
    acc += std::pow(static_cast<double>(k), -s);
    cdf_[k - 1] = acc;
  }
  harmonic_ = acc;
}

std::uint64_t ZipfDistribution::operator()(Rng& rng) const {
  double target = uniform01(rng) * harmonic_;
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  auto idx = static_cast<std::uint64_t>(it - cdf_.begin());
  return std::min(idx, n_ - 1) + 1;
}

double ZipfDistribution::pmf(std::uint64_t k) const {
  if (k < 1 || k > n_) return 0.0;
  return std::pow(static_cast<double>(k), -s_) / harmonic_;
}

std::uint64_t zipf_sample(std::uint64_t n, double s, Rng& rng) { return ZipfDistribution(n, s)(rng); }

std::string_view to_string(TrafficClass c) {
  switch (c) {
    case TrafficClass::LiveNonPackaged: return "live/no";
    case TrafficClass::LivePackaged: return "live/yes";
    case TrafficClass::VodNonPackaged: return "vod/no";
    case TrafficClass::WebsiteNonPackaged: return "website/no";
  }
  return "?";
}

ServiceClass service_of(TrafficClass c) {
  switch (c) {
    case TrafficClass::LiveNonPackaged:
    case TrafficClass::LivePackaged: return ServiceClass::LiveStreaming;
    case TrafficClass::VodNonPackaged: return ServiceClass::VideoOnDemand;
    case TrafficClass::WebsiteNonPackaged: return ServiceClass::Website;
  }
  return ServiceClass::Website;
}

bool is_packaged(TrafficClass c) { return c == TrafficClass::LivePackaged; }

WorkloadConfig WorkloadConfig::defaults() {
  WorkloadConfig cfg;
  // Record counts per class over seven days of production logs.
  constexpr std::array<double, 4> kClassRecords = {152697608, 129278868, 2069393, 14301252};
  const double total = std::accumulate(kClassRecords.begin(), kClassRecords.end(), 0.0);

  const LogNormalParams live = fit_lognormal(0.03936665, 0.075, 0.12234965);
  const LogNormalParams vod = fit_lognormal(0.0866492, 0.2026076, 0.3279754);
  const LogNormalParams web = fit_lognormal(0.00713175, 0.0578163, 0.49207115);

  cfg.classes[0] = {kClassRecords[0] / total, 2000, 0.8, live, {{".ts", 0.55}, {".m3u8", 0.45}}};
  cfg.classes[1] = {kClassRecords[1] / total, 2000, 0.8, live,
                    {{".ts", 0.40}, {".m3u8", 0.30}, {".dash", 0.20}, {".mpd", 0.10}}};
  cfg.classes[2] = {kClassRecords[2] / total, 5000, 0.8, vod,
                    {{".dash", 0.50}, {".ts", 0.25}, {".mpd", 0.15}, {".m3u8", 0.10}}};
  cfg.classes[3] = {kClassRecords[3] / total, 20000, 0.8, web,
                    {{".jpg", 0.35}, {".png", 0.20}, {".js", 0.20}, {".css", 0.10}, {".html", 0.08},
                     {".mp4", 0.04}, {".mp3", 0.03}}};

  // Evening peak 19:00-21:59, secondary peak 03:00-05:59.
  cfg.hourly_weights = {0.030, 0.025, 0.030, 0.054, 0.058, 0.052, 0.030, 0.028, 0.030, 0.032, 0.034, 0.036,
                        0.038, 0.036, 0.034, 0.034, 0.036, 0.040, 0.046, 0.068, 0.072, 0.066, 0.046, 0.040};

  // Illustrative shares; the serving ISP dominates.
  cfg.isps = {{"FPT", 0.55, 118, 68},    {"VNPT", 0.20, 113, 160}, {"Viettel", 0.15, 27, 72},
              {"Mobifone", 0.04, 42, 112}, {"SCTV", 0.02, 115, 79}, {"Other", 0.04, 103, 7}};
  cfg.provinces = {{"Hanoi", 0.2352},     {"Ho Chi Minh", 0.16}, {"Hai Phong", 0.06},  {"Bac Ninh", 0.05},
                   {"Nam Dinh", 0.045},   {"Thai Binh", 0.04},   {"Nghe An", 0.04},    {"Thanh Hoa", 0.04},
                   {"Hai Duong", 0.035},  {"Quang Ninh", 0.035}, {"Da Nang", 0.03},    {"Can Tho", 0.03},
                   {"Dong Thap", 0.03},   {"Hung Yen", 0.03},    {"Vinh Phuc", 0.03},  {"Bac Giang", 0.025},
                   {"Phu Tho", 0.025},    {"Thai Nguyen", 0.02}, {"Ninh Binh", 0.02},  {"Khanh Hoa", 0.0198}};
  return cfg;
}

void WorkloadConfig::validate() const {
  double mix = 0;
  for (const auto& c : classes) {
    if (c.mix < 0) throw ConfigError("workload: class mix must be non-negative");
    if (c.catalog_size < 1) throw ConfigError("workload: catalog_size must be >= 1");
    if (c.zipf_exponent < 0) throw ConfigError("workload: zipf_exponent must be >= 0");
    if (!(c.size_mb.sigma >= 0)) throw ConfigError("workload: size sigma must be >= 0");
    if (c.mix > 0 && c.extensions.empty()) throw ConfigError("workload: class with traffic needs extensions");
    for (const auto& [ext, w] : c.extensions) {
      if (ext.empty() || ext.front() != '.' || w < 0) throw ConfigError("workload: bad extension weight " + ext);
    }
    mix += c.mix;
  }
  if (std::abs(mix - 1.0) > 1e-9) throw ConfigError("workload: class mix must sum to 1, got " + std::to_string(mix));
  double hours = 0;
  for (double w : hourly_weights) {
    if (w < 0) throw ConfigError("workload: hourly weights must be non-negative");
    hours += w;
  }
  if (hours <= 0) throw ConfigError("workload: hourly weights must not all be zero");
  if (!(duration_hours > 0)) throw ConfigError("workload: duration_hours must be positive");
  if (requests_per_day < 0) throw ConfigError("workload: requests_per_day must be non-negative");
  if (ip_pool_size < 1) throw ConfigError("workload: ip_pool_size must be >= 1");
  if (isps.empty() || provinces.empty()) throw ConfigError("workload: isps and provinces must be non-empty");
  if (provinces.size() > 256) throw ConfigError("workload: at most 256 provinces");
  for (const auto& i : isps) {
    if (i.weight < 0) throw ConfigError("workload: ISP weight must be non-negative");
  }
  for (const auto& p : provinces) {
    if (p.weight < 0) throw ConfigError("workload: province weight must be non-negative");
  }
}

std::vector<std::int64_t> gen_arrivals(const WorkloadConfig& cfg, Rng& rng) {
  const double weight_sum = std::accumulate(cfg.hourly_weights.begin(), cfg.hourly_weights.end(), 0.0);
  const std::int64_t start = cfg.start_unix_ms;
  const std::int64_t end = start + static_cast<std::int64_t>(std::llround(cfg.duration_hours * kHourMs));
  const std::int64_t offset_ms = std::int64_t{cfg.utc_offset_minutes} * 60'000;

  // Segments between local hour boundaries, with their cumulative intensity.
  struct Segment {
    std::int64_t begin, end;
    double rate_per_ms;
    double cum_begin, cum_end;
  };
  std::vector<Segment> segments;
  double cum = 0;
  for (std::int64_t t = start; t < end;) {
    std::int64_t local = t + offset_ms;
    std::int64_t hour_index = local / kHourMs - (local % kHourMs < 0 ? 1 : 0);
    std::int64_t next = std::min(end, (hour_index + 1) * kHourMs - offset_ms);
    auto hour_of_day = static_cast<std::size_t>(((hour_index % 24) + 24) % 24);
    double rate = cfg.requests_per_day * cfg.hourly_weights[hour_of_day] / weight_sum / kHourMs;
    double mass = rate * static_cast<double>(next - t);
    segments.push_back({t, next, rate, cum, cum + mass});
    cum += mass;
    t = next;
  }

  std::vector<std::int64_t> times;
  double x = 0;
  std::size_t seg = 0;
  while (true) {
    x += -std::log(1.0 - uniform01(rng));
    if (x >= cum) break;
    while (seg < segments.size() && !(segments[seg].cum_end > x)) ++seg;
    if (seg == segments.size()) break;
    const Segment& s = segments[seg];
    auto t = s.begin + static_cast<std::int64_t>(std::floor((x - s.cum_begin) / s.rate_per_ms));
    times.push_back(std::clamp(t, s.begin, s.end - 1));
  }
  return times;
}

std::string Ledger::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["requests"] = requests;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  nlohmann::ordered_json mix = nlohmann::ordered_json::object();
  for (auto c : kAllTrafficClasses) {
    counts[std::string(to_string(c))] = class_counts[static_cast<std::size_t>(c)];
    mix[std::string(to_string(c))] = configured_mix[static_cast<std::size_t>(c)];
  }
  j["class_counts"] = counts;
  j["configured_class_mix"] = mix;
  j["configured_mime_request_fractions"] = configured_mime_requests;
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& [path, info] : contents) {
    items.push_back({{"path", path},
                     {"service", to_string(service_of(info.cls))},
                     {"packaged", is_packaged(info.cls)},
                     {"size_bytes", info.size_bytes},
                     {"requests", info.requests}});
  }
  j["contents"] = items;
  return j.dump(2);
}

GeneratedTrace gen_trace(const WorkloadConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  GeneratedTrace out;
  Ledger& ledger = out.ledger;
  ledger.seed = cfg.seed;

  // IP pool: address a.b.<province index>.<host> carries its ISP and province.
  std::vector<double> isp_w, prov_w;
  for (const auto& i : cfg.isps) isp_w.push_back(i.weight);
  for (const auto& p : cfg.provinces) prov_w.push_back(p.weight);
  const auto isp_cum = cumulative_of(isp_w);
  const auto prov_cum = cumulative_of(prov_w);
  std::vector<std::string> pool;
  pool.reserve(cfg.ip_pool_size);
  for (std::uint32_t i = 0; i < cfg.ip_pool_size; ++i) {
    const IspBlock& isp = cfg.isps[pick_weighted(isp_cum, uniform01(rng))];
    std::size_t prov = pick_weighted(prov_cum, uniform01(rng));
    auto host = static_cast<std::uint32_t>(1 + rng() % 254);
    pool.push_back(IpAddress::v4((std::uint32_t{isp.first_octet} << 24) | (std::uint32_t{isp.second_octet} << 16) |
                                 (static_cast<std::uint32_t>(prov) << 8) | host)
                       .to_string());
  }
  out.geo_table_csv = "cidr,isp,province,country\n";
  for (const auto& isp : cfg.isps) {
    for (std::size_t p = 0; p < cfg.provinces.size(); ++p) {
      out.geo_table_csv += std::to_string(isp.first_octet) + "." + std::to_string(isp.second_octet) + "." +
                           std::to_string(p) + ".0/24," + isp.name + "," + cfg.provinces[p].name + "," + cfg.country +
                           "\n";
    }
  }

  std::vector<double> mix;
  for (const auto& c : cfg.classes) mix.push_back(c.mix);
  const auto mix_cum = cumulative_of(mix);
  std::vector<ZipfDistribution> zipf;
  std::vector<std::vector<double>> ext_cum;
  for (std::size_t c = 0; c < kTrafficClassCount; ++c) {
    const auto& cls = cfg.classes[c];
    zipf.emplace_back(cls.catalog_size, cls.zipf_exponent);
    std::vector<double> w;
    for (const auto& e : cls.extensions) w.push_back(e.second);
    if (w.empty()) w.push_back(1.0);
    ext_cum.push_back(cumulative_of(w));
    ledger.configured_mix[c] = cls.mix;
    double wsum = ext_cum.back().back();
    for (const auto& [ext, weight] : cls.extensions) {
      std::string mime(to_string(mime_class_of("x" + ext)));
      ledger.configured_mime_requests[mime] += cls.mix * (wsum > 0 ? weight / wsum : 0.0);
    }
  }

  const std::vector<std::int64_t> arrivals = gen_arrivals(cfg, rng);
  out.events.reserve(arrivals.size());
  for (std::int64_t t : arrivals) {
    auto c = pick_weighted(mix_cum, uniform01(rng));
    auto cls = static_cast<TrafficClass>(c);
    std::uint64_t rank = zipf[c](rng);
    const auto& exts = cfg.classes[c].extensions;
    std::string_view ext = exts[pick_weighted(ext_cum[c], uniform01(rng))].first;
    const std::string& ip = pool[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pool.size()))];

    RequestEvent e;
    e.time_ms = t;
    e.client_ip = ip;
    e.content = asset_path(cls, rank, ext);
    e.service = service_of(cls);
    e.packaged = is_packaged(cls);

    auto [it, inserted] = ledger.contents.try_emplace(e.content, ContentInfo{cls, 0, 0});
    if (inserted) {
      // Size is a property of the object: derive it from the path alone.
      Rng size_rng(mix64(cfg.seed ^ fnv1a64(e.content)));
      double mb = sample_lognormal(cfg.classes[c].size_mb, size_rng);
      auto bytes = static_cast<std::uint64_t>(std::llround(std::min(mb * 1e6, static_cast<double>(kMaxObjectBytes))));
      it->second.size_bytes = std::max<std::uint64_t>(1, bytes);
    }
    ++it->second.requests;
    e.size_bytes = it->second.size_bytes;
    ++ledger.class_counts[c];
    out.events.push_back(std::move(e));
  }
  ledger.requests = out.events.size();
  return out;
}

std::string events_to_csv(std::span<const RequestEvent> events) {
  std::string out(kEventCsvHeader);
  out += '\n';
  out.reserve(events.size() * 64);
  for (const auto& e : events) append_event_csv(out, e);
  return out;
}

}  // namespace cdnlog
