// Python bindings. Records cross the boundary as dicts; summaries produced as
// JSON by the library are returned as JSON text and decoded in __init__.py.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cdnlog/classify.hpp"
#include "cdnlog/config.hpp"
#include "cdnlog/errors.hpp"
#include "cdnlog/generate.hpp"
#include "cdnlog/logline.hpp"
#include "cdnlog/metrics.hpp"
#include "cdnlog/pipeline.hpp"
#include "cdnlog/simulate.hpp"

namespace py = pybind11;
using namespace cdnlog;

namespace {

RunConfig config_of(const std::string& json_text) {
  return json_text.empty() ? RunConfig{} : parse_config(json_text);
}

py::dict record_dict(const LogRecord& r) {
  py::dict d;
  d["latency_ms"] = r.latency_ms;
  d["client_ip"] = r.client_ip.to_string();
  d["status"] = std::string(to_wire(r.status));
  d["unix_seconds"] = r.timestamp.unix_seconds();
  d["utc_offset_minutes"] = r.timestamp.utc_offset_minutes;
  d["timestamp"] = format_timestamp(r.timestamp);
  d["content_path"] = r.content_path;
  d["size_bytes"] = r.size_bytes;
  return d;
}

LogRecord record_of(const py::dict& d) {
  LogRecord r;
  r.latency_ms = d["latency_ms"].cast<std::int64_t>();
  auto ip = IpAddress::parse(d["client_ip"].cast<std::string>());
  auto status = parse_hit_status(d["status"].cast<std::string>());
  auto ts = parse_timestamp(d["timestamp"].cast<std::string>());
  if (!ip || !status || !ts || r.latency_ms < 0) throw py::value_error("invalid record");
  r.client_ip = *ip;
  r.status = *status;
  r.timestamp = *ts;
  r.content_path = d["content_path"].cast<std::string>();
  r.size_bytes = d["size_bytes"].cast<std::uint64_t>();
  return r;
}

py::dict event_dict(const RequestEvent& e) {
  py::dict d;
  d["time_ms"] = e.time_ms;
  d["client_ip"] = e.client_ip;
  d["content"] = e.content;
  d["size_bytes"] = e.size_bytes;
  d["service"] = std::string(to_string(e.service));
  d["packaged"] = e.packaged;
  return d;
}

RequestEvent event_of(const py::dict& d) {
  RequestEvent e;
  e.time_ms = d["time_ms"].cast<std::int64_t>();
  e.client_ip = d["client_ip"].cast<std::string>();
  e.content = d["content"].cast<std::string>();
  e.size_bytes = d["size_bytes"].cast<std::uint64_t>();
  auto service = parse_service_class(d["service"].cast<std::string>());
  if (!service) throw py::value_error("unknown service class");
  e.service = *service;
  e.packaged = d["packaged"].cast<bool>();
  return e;
}

py::object opt(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::object(py::none()); }

PathList paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "CDN access-log analytics and cache hierarchy simulation";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "parse_line",
      [](const std::string& line) -> py::object {
        auto parsed = parse_line(line);
        if (auto* r = std::get_if<LogRecord>(&parsed)) return record_dict(*r);
        return py::str(std::string(to_string(std::get<ParseError>(parsed).reason)));
      },
      "Parse one log line. Returns a record dict, or the rejection reason as a string.");

  m.def(
      "format_record", [](const py::dict& d) { return format_record(record_of(d)); },
      "Render a record dict as a canonical log line.");

  m.def(
      "clean",
      [](const std::vector<std::string>& lines, unsigned threads) {
        std::vector<std::string_view> views(lines.begin(), lines.end());
        CleanResult c = clean_parallel(views, threads);
        py::list records;
        for (const auto& r : c.records) records.append(record_dict(r));
        return py::make_tuple(records, c.stats.to_json());
      },
      py::arg("lines"), py::arg("threads") = 1u);

  m.def(
      "classify",
      [](const std::vector<std::string>& lines, const std::string& config_json) {
        RunConfig cfg = config_of(config_json);
        CleanResult c = clean_stream(lines);
        ClassifyResult res = classify_stream(std::move(c.records), cfg.patterns);
        py::list out;
        for (const auto& cr : res.records) {
          py::dict d = record_dict(cr.record);
          d["service"] = std::string(to_string(cr.service));
          d["packaging"] = std::string(to_string(cr.packaging));
          out.append(d);
        }
        return out;
      },
      py::arg("lines"), py::arg("config_json") = "");

  m.def(
      "hit_rates",
      [](std::uint64_t n_miss, std::uint64_t n_hit, std::uint64_t n_hit1, std::uint64_t n_local,
         bool include_local) {
        HitCounts c{n_miss, n_hit, n_hit1, n_local};
        HitRateReport r = hit_rate_report(c, include_local);
        py::dict d;
        d["edge"] = opt(r.edge_rate);
        d["regional"] = opt(r.regional_rate);
        d["system"] = opt(r.system_rate);
        return d;
      },
      py::arg("n_miss"), py::arg("n_hit"), py::arg("n_hit1"), py::arg("n_local") = 0,
      py::arg("include_local") = false);

  m.def(
      "summarize",
      [](std::vector<std::int64_t> values, double divisor) {
        if (values.empty()) throw py::value_error("summary of an empty set");
        FiveNumberSummary s = summarize(values, divisor);
        py::dict d;
        d["lower_whisker"] = s.lower_whisker;
        d["q1"] = s.q1;
        d["median"] = s.median;
        d["q3"] = s.q3;
        d["upper_whisker"] = s.upper_whisker;
        d["mean"] = s.mean;
        d["count"] = s.count;
        return d;
      },
      py::arg("values"), py::arg("divisor") = 1.0);

  m.def(
      "generate",
      [](const std::string& config_json) {
        GeneratedTrace t = gen_trace(config_of(config_json).workload);
        py::list events;
        for (const auto& e : t.events) events.append(event_dict(e));
        return py::make_tuple(events, t.ledger.to_json());
      },
      py::arg("config_json") = "");

  m.def(
      "replay",
      [](const py::list& events, const std::string& config_json, std::size_t warmup) {
        std::vector<RequestEvent> evs;
        evs.reserve(events.size());
        for (const auto& e : events) evs.push_back(event_of(e.cast<py::dict>()));
        RunConfig cfg = config_of(config_json);
        ReplayResult r = replay(evs, cfg.topology, {warmup, false});
        py::list statuses;
        for (const auto& o : r.outcomes) statuses.append(std::string(to_wire(o.status)));
        return py::make_tuple(statuses, r.summary.to_json());
      },
      py::arg("events"), py::arg("config_json") = "", py::arg("warmup") = 0);

  // File-level commands; each returns the JSON summary the CLI prints.
  m.def(
      "cmd_clean",
      [](const std::vector<std::string>& inputs, const std::string& out, unsigned threads) {
        return cmd_clean(paths(inputs), out, {threads});
      },
      py::arg("inputs"), py::arg("out"), py::arg("threads") = 1u);
  m.def(
      "cmd_classify",
      [](const std::vector<std::string>& inputs, const std::string& out, const std::string& config_json,
         unsigned threads) { return cmd_classify(paths(inputs), config_of(config_json).patterns, out, {threads}); },
      py::arg("inputs"), py::arg("out"), py::arg("config_json") = "", py::arg("threads") = 1u);
  m.def(
      "cmd_report",
      [](const std::vector<std::string>& inputs, const std::string& out, const std::string& config_json,
         bool plot_data, unsigned threads) {
        return cmd_report(paths(inputs), config_of(config_json), {plot_data}, out, {threads});
      },
      py::arg("inputs"), py::arg("out"), py::arg("config_json") = "", py::arg("plot_data") = false,
      py::arg("threads") = 1u);
  m.def(
      "cmd_simulate",
      [](const std::vector<std::string>& inputs, const std::string& out, const std::string& config_json, bool sort,
         std::size_t warmup, unsigned threads) {
        return cmd_simulate(paths(inputs), config_of(config_json), {sort, warmup, false}, out, {threads});
      },
      py::arg("inputs"), py::arg("out"), py::arg("config_json") = "", py::arg("sort") = false,
      py::arg("warmup") = 0, py::arg("threads") = 1u);
  m.def(
      "cmd_generate",
      [](const std::string& out, const std::string& config_json) {
        return cmd_generate(config_of(config_json).workload, out);
      },
      py::arg("out"), py::arg("config_json") = "");
}
