#include "cdnlog/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cdnlog/errors.hpp"
#include "cdnlog/io.hpp"

namespace cdnlog {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {


// Streams into a temporary sibling and renames on commit(), so a failed run
// never leaves a truncated output behind.
class OutputFile {
 public:
  explicit OutputFile(fs::path path) : path_(std::move(path)), tmp_(path_.string() + ".partial") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw InputError("cannot write " + path_.string());
  }
  ~OutputFile() {
    if (out_.is_open()) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }
  void write(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void commit() {
    out_.close();
    if (!out_) throw InputError("failed writing " + path_.string());
    fs::rename(tmp_, path_);
  }

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

void check_inputs(const PathList& inputs) {
  for (const auto& p : inputs) {
    if (!fs::is_regular_file(p)) throw InputError("input not found: " + p.string());
  }
}

std::string first_line_of(const fs::path& p) {
  LineReader r(p);
  std::string_view line;
  return r.next(line) ? std::string(line) : std::string();
}

// Calls fn(lines) for successive batches of lines from every input in order.
template <typename Fn>
void for_each_batch(const PathList& inputs, Fn&& fn) {
  std::vector<std::string_view> lines;
  for (const auto& p : inputs) {
    LineReader reader(p);
    while (reader.next_batch(lines)) fn(std::span<const std::string_view>(lines));
  }
}

// Calls fn(r) for each accepted line of the batch, in order, and tallies
// rejections. `r` is overwritten for every accepted line.
template <typename Fn>
void parse_batch(std::span<const std::string_view> lines, unsigned threads, RejectionStats& stats, LogRecord& r,
                 Fn&& fn) {
  if (threads <= 1) {
    for (auto line : lines) {
      if (auto reason = parse_line_into(line, r)) {
        stats.record_reject(*reason);
      } else {
        stats.record_accept();
        fn(r);
      }
    }
    return;
  }
  CleanResult c = clean_parallel(lines, threads);
  stats += c.stats;
  for (auto& rec : c.records) {
    r = std::move(rec);
    fn(r);
  }
}

// Pass 1 of classification over raw logs.
ContentMissSet miss_set_of_logs(const PathList& inputs, const PatternConfig& patterns, unsigned threads,
                                RejectionStats* stats) {
  ContentMissSet miss(patterns.hash_threshold);
  RejectionStats local;
  LogRecord scratch;
  for_each_batch(inputs, [&](std::span<const std::string_view> lines) {
    parse_batch(lines, threads, local, scratch, [&](const LogRecord& r) {
      if (r.status == HitStatus::Miss) miss.insert(content_identity(r.content_path, patterns));
    });
  });
  if (stats) *stats += local;
  return miss;
}

// Pass 2: calls fn(classified) for every accepted record in input order.
template <typename Fn>
void classify_logs(const PathList& inputs, const PatternConfig& patterns, const ContentMissSet& miss, unsigned threads,
                   Fn&& fn) {
  RejectionStats ignored;
  ClassifiedRecord cr;
  for_each_batch(inputs, [&](std::span<const std::string_view> lines) {
    parse_batch(lines, threads, ignored, cr.record, [&](const LogRecord& r) {
      cr.service = classify_service(r.content_path, patterns);
      cr.packaging = classify_packaging(r.content_path, miss, patterns);
      fn(cr);
    });
  });
}

// Shortest round-trip decimal.
std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson summary_json(const FiveNumberSummary& s) {
  return {{"count", s.count},   {"lower_whisker", s.lower_whisker}, {"q1", s.q1},
          {"median", s.median}, {"q3", s.q3},                       {"upper_whisker", s.upper_whisker},
          {"mean", s.mean},     {"approximate", s.approximate}};
}

ojson counts_json(const HitCounts& c) {
  return {{"n_miss", c.n_miss}, {"n_hit", c.n_hit}, {"n_hit1", c.n_hit1}, {"n_local", c.n_local}};
}

ojson bucket_json(const TimeSeriesBucket& b) {
  return {{"hour", hour_label(b.bucket_start, b.utc_offset_minutes)},
          {"unix_start", b.unix_start()},
          {"requests", b.request_count},
          {"bytes", b.total_bytes},
          {"latency_sum_seconds", b.latency_sum_seconds()},
          {"latency_mean_seconds", b.mean_latency_seconds()},
          {"statuses", counts_json(b.hits)}};
}

std::string summary_row(const FiveNumberSummary& s) {
  return std::to_string(s.count) + "," + num(s.lower_whisker) + "," + num(s.q1) + "," + num(s.median) + "," +
         num(s.q3) + "," + num(s.upper_whisker) + "," + num(s.mean) + "," + (s.approximate ? "true" : "false");
}

void write_text(const fs::path& path, std::string_view text) { write_file_atomic(path, text); }

std::string time_series_csv(const std::vector<TimeSeriesBucket>& buckets) {
  std::string out = "hour,unix_start,requests,bytes,latency_sum_seconds,latency_mean_seconds,n_miss,n_hit,n_hit1,n_local\n";
  for (const auto& b : buckets) {
    csv_append_row(out, {hour_label(b.bucket_start, b.utc_offset_minutes), std::to_string(b.unix_start()),
                         std::to_string(b.request_count), std::to_string(b.total_bytes), num(b.latency_sum_seconds()),
                         num(b.mean_latency_seconds()), std::to_string(b.hits.n_miss), std::to_string(b.hits.n_hit),
                         std::to_string(b.hits.n_hit1), std::to_string(b.hits.n_local)});
  }
  return out;
}

void write_plot_data(const Report& r, const fs::path& dir) {
  ensure_dir(dir);
  {
    std::string out = "hour,requests,bytes\n";
    for (const auto& b : r.time_series) {
      csv_append_row(out, {hour_label(b.bucket_start, b.utc_offset_minutes), std::to_string(b.request_count),
                           std::to_string(b.total_bytes)});
    }
    write_text(dir / "requests_by_hour.csv", out);
  }
  {
    std::string out = "hour,service,requests,bytes,latency_sum_seconds,latency_mean_seconds\n";
    for (const auto& [svc, buckets] : r.time_series_by_service) {
      for (const auto& b : buckets) {
        csv_append_row(out, {hour_label(b.bucket_start, b.utc_offset_minutes), to_string(svc),
                             std::to_string(b.request_count), std::to_string(b.total_bytes),
                             num(b.latency_sum_seconds()), num(b.mean_latency_seconds())});
      }
    }
    write_text(dir / "requests_by_hour_by_service.csv", out);
  }
  {
    std::string out = "mime,request_fraction,byte_fraction\n";
    for (std::size_t i = 0; i < kMimeClassCount; ++i) {
      out += std::string(to_string(static_cast<MimeClass>(i))) + "," + num(r.mime.request_fraction[i]) + "," +
             num(r.mime.byte_fraction[i]) + "\n";
    }
    write_text(dir / "mime_fractions.csv", out);
  }
  {
    std::string out = "service,lower_whisker,q1,median,q3,upper_whisker\n";
    for (const auto& [svc, s] : r.sizes) {
      out += std::string(to_string(svc)) + "," + num(s.lower_whisker) + "," + num(s.q1) + "," + num(s.median) + "," +
             num(s.q3) + "," + num(s.upper_whisker) + "\n";
    }
    write_text(dir / "size_boxplot_mb.csv", out);
  }
  for (const auto& [key, groups] : r.hit_rates) {
    std::string out = "group,edge_rate,regional_rate,system_rate,requests\n";
    for (const auto& [label, rep] : groups) {
      csv_append_row(out, {label, opt_num(rep.edge_rate), opt_num(rep.regional_rate), opt_num(rep.system_rate),
                           std::to_string(rep.counts.cdn_requests() + rep.counts.n_local)});
    }
    write_text(dir / ("hit_rate_by_" + std::string(to_string(key)) + ".csv"), out);
  }
  for (const auto& [key, groups] : r.latency) {
    std::string out = "group,lower_whisker,q1,median,q3,upper_whisker,mean\n";
    for (const auto& [label, s] : groups) {
      csv_append_row(out, {label, num(s.lower_whisker), num(s.q1), num(s.median), num(s.q3), num(s.upper_whisker),
                           num(s.mean)});
    }
    write_text(dir / ("latency_boxplot_by_" + std::string(to_string(key)) + ".csv"), out);
  }
  if (auto it = r.hit_rates.find(GroupKey::Province); it != r.hit_rates.end()) {
    std::string out = "province,requests\n";
    for (const auto& [label, rep] : it->second) {
      csv_append_row(out, {label, std::to_string(rep.counts.cdn_requests() + rep.counts.n_local)});
    }
    write_text(dir / "requests_by_province.csv", out);
  }
}

// Counts how many queries reach the wrapped resolver.
class CountingResolver : public Resolver {
 public:
  explicit CountingResolver(Resolver& inner) : inner_(inner) {}
  ResolveResult resolve(const IpAddress& ip) override {
    ++calls;
    return inner_.resolve(ip);
  }
  std::uint64_t calls = 0;

 private:
  Resolver& inner_;
};

}  // namespace

void append_labeled_row(std::string& out, const ClassifiedRecord& r, const std::optional<GeoInfo>* geo) {
  // Written field by field: this runs once per record on the classify path.
  auto text = [&](std::string_view v) {
    out += ',';
    if (!csv_needs_quotes(v)) {
      out += v;
    } else {
      out += csv_escape(v);
    }
  };
  const LogRecord& rec = r.record;
  append_latency(out, rec.latency_ms);
  out += ',';
  rec.client_ip.append_to(out);
  out += ',';
  out += to_wire(rec.status);
  out += ',';
  append_timestamp(out, rec.timestamp);
  text(rec.content_path);
  out += ',';
  char buf[24];
  out.append(buf, std::to_chars(buf, buf + sizeof(buf), rec.size_bytes).ptr);
  out += ',';
  out += to_string(r.service);
  out += ',';
  out += to_string(r.packaging);
  if (geo) {
    if (*geo && (*geo)->isp.size() + (*geo)->province.size() + (*geo)->country.size() > 0) {
      text((*geo)->isp);
      text((*geo)->province);
      text((*geo)->country);
    } else {
      out += ",,,";
    }
  }
  out += '\n';
}

std::optional<EnrichedRecord> parse_labeled_row(std::string_view line, bool enriched) {
  std::vector<std::string> f;
  if (!csv_split(line, f) || f.size() != (enriched ? 11u : 8u)) return std::nullopt;
  std::string text = f[0] + ", " + f[1] + ", " + f[2] + ", [" + f[3] + "], " + f[4] + ", " + f[5];
  ParseResult pr = parse_line(text);
  auto* rec = std::get_if<LogRecord>(&pr);
  if (!rec || rec->content_path != f[4]) return std::nullopt;
  auto svc = parse_service_class(f[6]);
  auto pkg = parse_packaging_class(f[7]);
  if (!svc || !pkg) return std::nullopt;
  EnrichedRecord out;
  out.classified.record = std::move(*rec);
  out.classified.service = *svc;
  out.classified.packaging = *pkg;
  if (enriched) {
    int filled = !f[8].empty() + !f[9].empty() + !f[10].empty();
    if (filled == 3) {
      out.geo = GeoInfo{f[8], f[9], f[10]};
    } else if (filled != 0) {
      return std::nullopt;
    }
  }
  return out;
}

InputFormat detect_format(std::string_view first_line) {
  if (!first_line.empty() && first_line.back() == '\r') first_line.remove_suffix(1);
  if (first_line == kLabeledHeader) return InputFormat::Labeled;
  if (first_line == kEnrichedHeader) return InputFormat::Enriched;
  if (first_line == kEventCsvHeader) return InputFormat::Events;
  return InputFormat::Log;
}

// --- clean ---

std::string cmd_clean(const PathList& inputs, const fs::path& out_dir, const CommonOptions& opts) {
  check_inputs(inputs);
  ensure_dir(out_dir);
  OutputFile out(out_dir / "clean.log");
  RejectionStats stats;
  LogRecord scratch;
  std::string buf;
  for_each_batch(inputs, [&](std::span<const std::string_view> lines) {
    buf.clear();
    parse_batch(lines, opts.threads, stats, scratch, [&](const LogRecord& r) {
      append_record(buf, r);
      buf += '\n';
    });
    out.write(buf);
  });
  out.commit();
  std::string json = stats.to_json();
  write_text(out_dir / "clean_stats.json", json + "\n");
  return json;
}

// --- classify ---

std::string cmd_classify(const PathList& inputs, const PatternConfig& patterns, const fs::path& out_dir,
                         const CommonOptions& opts) {
  patterns.validate();
  check_inputs(inputs);
  ensure_dir(out_dir);
  RejectionStats stats;
  ContentMissSet miss = miss_set_of_logs(inputs, patterns, opts.threads, &stats);

  OutputFile out(out_dir / "labeled.csv");
  ClassCounts counts;
  std::string buf(kLabeledHeader);
  buf += '\n';
  classify_logs(inputs, patterns, miss, opts.threads, [&](const ClassifiedRecord& r) {
    counts.add(r.service, r.packaging);
    append_labeled_row(buf, r);
    if (buf.size() > (1u << 20)) {
      out.write(buf);
      buf.clear();
    }
  });
  out.write(buf);
  out.commit();
  write_text(out_dir / "class_counts.csv", counts.to_csv());

  ojson j;
  j["records"] = counts.total();
  j["rejected"] = stats.rejected;
  j["miss_set_size"] = miss.size();
  ojson classes = ojson::array();
  for (auto s : kAllServiceClasses) {
    for (auto p : {PackagingClass::NonPackaged, PackagingClass::Packaged}) {
      if (auto n = counts.get(s, p)) classes.push_back({{"service", to_string(s)}, {"packaging", to_string(p)}, {"count", n}});
    }
  }
  j["class_counts"] = classes;
  return j.dump(2);
}

// --- enrich ---

std::string cmd_enrich(const PathList& inputs, const GeoConfig& geo, const fs::path& cache_path, const fs::path& out_dir,
                       const CommonOptions&) {
  check_inputs(inputs);
  std::unique_ptr<Resolver> resolver;
  if (geo.resolver == GeoConfig::Kind::Table) {
    if (geo.table.empty()) throw ConfigError("enrich: geo.table is required for the table resolver");
    if (!fs::is_regular_file(geo.table)) throw ConfigError("enrich: geo table not found: " + geo.table.string());
    resolver = std::make_unique<CidrTableResolver>(CidrTableResolver::load(geo.table));
  } else {
    resolver = std::make_unique<HttpJsonResolver>(geo.http);
  }
  GeoNormalizer normalizer;
  if (!geo.synonyms.empty()) {
    if (!fs::is_regular_file(geo.synonyms)) throw ConfigError("enrich: synonym table not found: " + geo.synonyms.string());
    normalizer.synonyms = SynonymTable::load(geo.synonyms);
  }
  normalizer.deny_list = geo.deny_list;
  const fs::path cache_file = cache_path.empty() ? geo.cache : cache_path;
  GeoCache cache;
  if (!cache_file.empty() && fs::exists(cache_file)) cache = load_cache(cache_file);
  const std::size_t cached_before = cache.size();

  for (const auto& p : inputs) {
    auto fmt = detect_format(first_line_of(p));
    if (fmt != InputFormat::Labeled && fmt != InputFormat::Enriched) {
      throw InputError(p.string(), 1, "enrich expects labeled CSV from the classify command");
    }
  }

  ensure_dir(out_dir);
  OutputFile out(out_dir / "enriched.csv");
  CountingResolver counting(*resolver);
  std::uint64_t rows = 0, resolved = 0, invalid = 0, transient = 0;
  std::string buf(kEnrichedHeader);
  buf += '\n';
  for (const auto& p : inputs) {
    LineReader reader(p);
    std::string_view line;
    bool enriched = false;
    while (reader.next(line)) {
      if (reader.line_number() == 1) {
        enriched = detect_format(line) == InputFormat::Enriched;
        continue;
      }
      if (line.empty()) continue;
      auto rec = parse_labeled_row(line, enriched);
      if (!rec) throw InputError(p.string(), reader.line_number(), "malformed labeled row");
      ++rows;
      LookupResult res = lookup(rec->classified.record.client_ip, cache, counting, normalizer);
      if (std::holds_alternative<ResolverError>(res)) {
        // One retry for transient failures; still failing leaves the row blank.
        res = lookup(rec->classified.record.client_ip, cache, counting, normalizer);
      }
      std::optional<GeoInfo> g;
      if (auto* info = std::get_if<GeoInfo>(&res)) {
        g = *info;
        ++resolved;
      } else if (std::holds_alternative<Invalid>(res)) {
        ++invalid;
      } else {
        ++transient;
      }
      append_labeled_row(buf, rec->classified, &g);
      if (buf.size() > (1u << 20)) {
        out.write(buf);
        buf.clear();
      }
    }
  }
  out.write(buf);
  out.commit();
  if (!cache_file.empty()) save_cache(cache, cache_file);

  ojson j;
  j["records"] = rows;
  j["resolved"] = resolved;
  j["invalid"] = invalid;
  j["transient_errors"] = transient;
  j["resolver_calls"] = counting.calls;
  j["cache_entries_before"] = cached_before;
  j["cache_entries_after"] = cache.size();
  return j.dump(2);
}

// --- report ---

Report build_report(const PathList& inputs, const RunConfig& cfg, const CommonOptions& opts) {
  check_inputs(inputs);
  PathList logs, tables;
  for (const auto& p : inputs) {
    switch (detect_format(first_line_of(p))) {
      case InputFormat::Log: logs.push_back(p); break;
      case InputFormat::Labeled:
      case InputFormat::Enriched: tables.push_back(p); break;
      case InputFormat::Events: throw InputError(p.string(), 1, "report does not read event CSV; simulate it first");
    }
  }
  // An empty file reads as a log with no lines and mixes with anything.
  PathList nonempty_logs;
  for (const auto& p : logs) {
    if (fs::file_size(p) > 0) nonempty_logs.push_back(p);
  }
  if (!nonempty_logs.empty() && !tables.empty()) {
    throw InputError("report inputs mix raw logs and labeled CSV");
  }

  ReportBuilder builder(cfg.report);
  if (!nonempty_logs.empty()) {
    ContentMissSet miss = miss_set_of_logs(nonempty_logs, cfg.patterns, opts.threads, nullptr);
    classify_logs(nonempty_logs, cfg.patterns, miss, opts.threads, [&](const ClassifiedRecord& r) { builder.add(r); });
  }
  for (const auto& p : tables) {
    LineReader reader(p);
    std::string_view line;
    bool enriched = false;
    while (reader.next(line)) {
      if (reader.line_number() == 1) {
        enriched = detect_format(line) == InputFormat::Enriched;
        continue;
      }
      if (line.empty()) continue;
      auto rec = parse_labeled_row(line, enriched);
      if (!rec) throw InputError(p.string(), reader.line_number(), "malformed labeled row");
      builder.add(*rec);
    }
  }
  return builder.finish();
}

std::string report_to_json(const Report& r) {
  ojson j;
  j["records"] = r.records;
  ojson classes = ojson::array();
  for (auto s : kAllServiceClasses) {
    for (auto p : {PackagingClass::NonPackaged, PackagingClass::Packaged}) {
      if (auto n = r.class_counts.get(s, p)) {
        classes.push_back({{"service", to_string(s)}, {"packaging", to_string(p)}, {"count", n}});
      }
    }
  }
  j["class_counts"] = classes;
  ojson hits = ojson::object();
  for (const auto& [key, groups] : r.hit_rates) {
    ojson g = ojson::object();
    for (const auto& [label, rep] : groups) {
      ojson e = counts_json(rep.counts);
      e["edge_rate"] = opt_json(rep.edge_rate);
      e["regional_rate"] = opt_json(rep.regional_rate);
      e["system_rate"] = opt_json(rep.system_rate);
      g[label] = e;
    }
    hits[std::string(to_string(key))] = g;
  }
  j["hit_rates"] = hits;
  ojson lat = ojson::object();
  for (const auto& [key, groups] : r.latency) {
    ojson g = ojson::object();
    for (const auto& [label, s] : groups) g[label] = summary_json(s);
    lat[std::string(to_string(key))] = g;
  }
  j["latency_seconds"] = lat;
  ojson series = ojson::array();
  for (const auto& b : r.time_series) series.push_back(bucket_json(b));
  j["time_series"] = series;
  ojson by_service = ojson::object();
  for (const auto& [svc, buckets] : r.time_series_by_service) {
    ojson arr = ojson::array();
    for (const auto& b : buckets) arr.push_back(bucket_json(b));
    by_service[std::string(to_string(svc))] = arr;
  }
  j["time_series_by_service"] = by_service;
  ojson mime = ojson::object();
  for (std::size_t i = 0; i < kMimeClassCount; ++i) {
    mime[std::string(to_string(static_cast<MimeClass>(i)))] = {{"requests", r.mime.tally.requests[i]},
                                                               {"bytes", r.mime.tally.bytes[i]},
                                                               {"request_fraction", r.mime.request_fraction[i]},
                                                               {"byte_fraction", r.mime.byte_fraction[i]}};
  }
  j["mime"] = mime;
  ojson sizes = ojson::object();
  for (const auto& [svc, s] : r.sizes) sizes[std::string(to_string(svc))] = summary_json(s);
  j["sizes_mb"] = sizes;
  return j.dump(2);
}

std::string cmd_report(const PathList& inputs, const RunConfig& cfg, const ReportFlags& flags, const fs::path& out_dir,
                       const CommonOptions& opts) {
  Report r = build_report(inputs, cfg, opts);
  ensure_dir(out_dir);
  std::string json = report_to_json(r);
  write_text(out_dir / "report.json", json + "\n");

  std::string hits = "group_key,group,n_miss,n_hit,n_hit1,n_local,edge_rate,regional_rate,system_rate\n";
  for (const auto& [key, groups] : r.hit_rates) {
    for (const auto& [label, rep] : groups) {
      const auto& c = rep.counts;
      csv_append_row(hits, {to_string(key), label, std::to_string(c.n_miss), std::to_string(c.n_hit),
                            std::to_string(c.n_hit1), std::to_string(c.n_local), opt_num(rep.edge_rate),
                            opt_num(rep.regional_rate), opt_num(rep.system_rate)});
    }
  }
  write_text(out_dir / "hit_rates.csv", hits);

  std::string lat = "group_key,group,count,lower_whisker,q1,median,q3,upper_whisker,mean,approximate\n";
  for (const auto& [key, groups] : r.latency) {
    for (const auto& [label, s] : groups) {
      lat += std::string(to_string(key)) + ",";
      lat += csv_escape(label);
      lat += "," + summary_row(s) + "\n";
    }
  }
  write_text(out_dir / "latency.csv", lat);
  write_text(out_dir / "time_series.csv", time_series_csv(r.time_series));

  std::string mime = "mime,requests,bytes,request_fraction,byte_fraction\n";
  for (std::size_t i = 0; i < kMimeClassCount; ++i) {
    mime += std::string(to_string(static_cast<MimeClass>(i))) + "," + std::to_string(r.mime.tally.requests[i]) + "," +
            std::to_string(r.mime.tally.bytes[i]) + "," + num(r.mime.request_fraction[i]) + "," +
            num(r.mime.byte_fraction[i]) + "\n";
  }
  write_text(out_dir / "mime.csv", mime);

  std::string sizes = "service,count,lower_whisker,q1,median,q3,upper_whisker,mean,approximate\n";
  for (const auto& [svc, s] : r.sizes) sizes += std::string(to_string(svc)) + "," + summary_row(s) + "\n";
  write_text(out_dir / "sizes.csv", sizes);
  write_text(out_dir / "class_counts.csv", r.class_counts.to_csv());
  if (flags.plot_data) write_plot_data(r, out_dir / "plot");

  ojson j;
  j["records"] = r.records;
  if (auto it = r.hit_rates.find(GroupKey::All); it != r.hit_rates.end() && !it->second.empty()) {
    const auto& rep = it->second.begin()->second;
    j["edge_rate"] = opt_json(rep.edge_rate);
    j["regional_rate"] = opt_json(rep.regional_rate);
    j["system_rate"] = opt_json(rep.system_rate);
  }
  j["out_dir"] = out_dir.string();
  return j.dump(2);
}

// --- simulate ---

std::string cmd_simulate(const PathList& inputs, const RunConfig& cfg, const SimulateFlags& flags,
                         const fs::path& out_dir, const CommonOptions& opts) {
  cfg.topology.validate();
  check_inputs(inputs);
  std::vector<RequestEvent> events;
  std::vector<HitStatus> logged;
  PathList logs;
  for (const auto& p : inputs) {
    auto fmt = detect_format(first_line_of(p));
    if (fmt == InputFormat::Events) {
      auto part = load_event_csv(p);
      events.insert(events.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    } else if (fmt == InputFormat::Log) {
      logs.push_back(p);
    } else {
      throw InputError(p.string(), 1, "simulate reads event CSV or raw logs");
    }
  }
  if (!logs.empty() && !events.empty()) throw InputError("simulate inputs mix event CSV and raw logs");
  if (!logs.empty()) {
    ContentMissSet miss = miss_set_of_logs(logs, cfg.patterns, opts.threads, nullptr);
    classify_logs(logs, cfg.patterns, miss, opts.threads, [&](const ClassifiedRecord& r) {
      events.push_back(to_event(r, cfg.patterns));
      logged.push_back(r.record.status);
    });
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!is_serializable_path(events[i].content)) {
      throw InputError("event " + std::to_string(i) + ": path cannot be written as a log line");
    }
  }

  if (flags.sort) {
    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return events[a].time_ms < events[b].time_ms; });
    std::vector<RequestEvent> sorted;
    std::vector<HitStatus> sorted_logged;
    sorted.reserve(events.size());
    for (auto i : order) {
      sorted.push_back(std::move(events[i]));
      if (!logged.empty()) sorted_logged.push_back(logged[i]);
    }
    events = std::move(sorted);
    logged = std::move(sorted_logged);
  }

  ReplayResult result;
  try {
    result = replay(events, cfg.topology, {flags.warmup_events, flags.check_invariants});
  } catch (const ReplayError& e) {
    throw InputError(std::string(e.what()) + " (pass --sort to order events by time)");
  }

  ensure_dir(out_dir);
  OutputFile out(out_dir / "simulated.log");
  std::string buf;
  for (std::size_t i = 0; i < events.size(); ++i) {
    append_record(buf, to_log_record(events[i], result.outcomes[i], cfg.topology.output_utc_offset_minutes));
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out.write(buf);
      buf.clear();
    }
  }
  out.write(buf);
  out.commit();
  write_text(out_dir / "sim_summary.json", result.summary.to_json() + "\n");

  ojson j;
  j["events"] = events.size();
  j["statuses"] = counts_json(result.summary.statuses);
  HitRateReport rates = hit_rate_report(result.summary.statuses);
  j["edge_rate"] = opt_json(rates.edge_rate);
  j["regional_rate"] = opt_json(rates.regional_rate);
  j["system_rate"] = opt_json(rates.system_rate);
  if (!logs.empty()) {
    AgreementReport agree = compare(result.outcomes, logged);
    write_text(out_dir / "agreement.json", agree.to_json() + "\n");
    j["agreement"] = opt_json(agree.agreement());
  }
  return j.dump(2);
}

// --- generate ---

std::string cmd_generate(const WorkloadConfig& workload, const fs::path& out_dir) {
  GeneratedTrace trace = gen_trace(workload);
  ensure_dir(out_dir);
  write_text(out_dir / "events.csv", events_to_csv(trace.events));
  write_text(out_dir / "ledger.json", trace.ledger.to_json() + "\n");
  write_text(out_dir / "geo_table.csv", trace.geo_table_csv);
  ojson j;
  j["seed"] = workload.seed;
  j["requests"] = trace.ledger.requests;
  ojson classes = ojson::object();
  for (auto c : kAllTrafficClasses) classes[std::string(to_string(c))] = trace.ledger.class_counts[static_cast<std::size_t>(c)];
  j["class_counts"] = classes;
  j["contents"] = trace.ledger.contents.size();
  return j.dump(2);
}

}  // namespace cdnlog
