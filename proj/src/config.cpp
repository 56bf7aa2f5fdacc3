#include "cdnlog/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "cdnlog/errors.hpp"

namespace cdnlog {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
T get(const json& j, const std::string& where) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(where + ": expected a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!j.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError(where + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(where + ": expected a string");
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <typename T>
void maybe(const json& j, std::string_view key, const std::string& where, T& out) {
  if (auto it = j.find(std::string(key)); it != j.end()) out = get<T>(*it, where + "." + std::string(key));
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get<std::string>(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::filesystem::path resolve_path(const json& j, const std::string& where, const std::filesystem::path& base) {
  std::filesystem::path p = get<std::string>(j, where);
  if (p.empty()) throw ConfigError(where + ": empty path");
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::optional<ServiceClass> service_key(std::string_view k) { return parse_service_class(k); }

void parse_patterns(const json& j, PatternConfig& p) {
  const std::string w = "patterns";
  check_keys(j, w, {"live_patterns", "streaming_extensions", "strip_session_token", "hash_threshold"});
  if (j.contains("live_patterns")) p.live_patterns = string_list(j["live_patterns"], w + ".live_patterns");
  if (j.contains("streaming_extensions")) {
    p.streaming_extensions = string_list(j["streaming_extensions"], w + ".streaming_extensions");
  }
  maybe(j, "strip_session_token", w, p.strip_session_token);
  maybe(j, "hash_threshold", w, p.hash_threshold);
  p.validate();
}

void parse_geo(const json& j, GeoConfig& g, const std::filesystem::path& base) {
  const std::string w = "geo";
  check_keys(j, w, {"resolver", "table", "synonyms", "cache", "deny_list", "http"});
  if (j.contains("resolver")) {
    auto r = get<std::string>(j["resolver"], w + ".resolver");
    if (r == "table") {
      g.resolver = GeoConfig::Kind::Table;
    } else if (r == "http") {
      g.resolver = GeoConfig::Kind::Http;
    } else {
      throw ConfigError(w + ".resolver: expected \"table\" or \"http\"");
    }
  }
  if (j.contains("table")) g.table = resolve_path(j["table"], w + ".table", base);
  if (j.contains("synonyms")) g.synonyms = resolve_path(j["synonyms"], w + ".synonyms", base);
  if (j.contains("cache")) g.cache = resolve_path(j["cache"], w + ".cache", base);
  if (j.contains("deny_list")) {
    auto v = string_list(j["deny_list"], w + ".deny_list");
    g.deny_list = {v.begin(), v.end()};
  }
  if (j.contains("http")) {
    const json& h = j["http"];
    const std::string hw = w + ".http";
    check_keys(h, hw, {"url_template", "isp_field", "province_field", "country_field", "status_field", "fail_value",
                       "requests_per_minute", "timeout_ms"});
    auto& c = g.http;
    maybe(h, "url_template", hw, c.url_template);
    maybe(h, "isp_field", hw, c.isp_field);
    maybe(h, "province_field", hw, c.province_field);
    maybe(h, "country_field", hw, c.country_field);
    maybe(h, "status_field", hw, c.status_field);
    maybe(h, "fail_value", hw, c.fail_value);
    maybe(h, "requests_per_minute", hw, c.requests_per_minute);
    if (h.contains("timeout_ms")) c.timeout = std::chrono::milliseconds(get<std::uint64_t>(h["timeout_ms"], hw + ".timeout_ms"));
    if (!(c.requests_per_minute > 0)) throw ConfigError(hw + ".requests_per_minute must be positive");
    if (c.url_template.find("{ip}") == std::string::npos) throw ConfigError(hw + ".url_template must contain {ip}");
  }
  if (g.resolver == GeoConfig::Kind::Table && g.table.empty() && j.contains("resolver")) {
    throw ConfigError(w + ": resolver \"table\" needs \"table\"");
  }
}

void parse_topology(const json& j, TopologyConfig& t) {
  const std::string w = "topology";
  check_keys(j, w, {"n_edges", "n_regionals", "edge_capacity_bytes", "regional_capacity_bytes", "ttl_seconds",
                    "ttl_mode", "packaged_always_hit_at_edge", "client_cache_bytes", "output_utc_offset_minutes",
                    "latency"});
  maybe(j, "n_edges", w, t.n_edges);
  maybe(j, "n_regionals", w, t.n_regionals);
  maybe(j, "edge_capacity_bytes", w, t.edge_capacity_bytes);
  maybe(j, "regional_capacity_bytes", w, t.regional_capacity_bytes);
  maybe(j, "packaged_always_hit_at_edge", w, t.packaged_always_hit_at_edge);
  maybe(j, "client_cache_bytes", w, t.client_cache_bytes);
  maybe(j, "output_utc_offset_minutes", w, t.output_utc_offset_minutes);
  if (t.output_utc_offset_minutes < -24 * 60 || t.output_utc_offset_minutes > 24 * 60) {
    throw ConfigError(w + ".output_utc_offset_minutes out of range");
  }
  if (j.contains("ttl_seconds")) {
    const json& ttl = j["ttl_seconds"];
    require_object(ttl, w + ".ttl_seconds");
    for (const auto& [k, v] : ttl.items()) {
      auto s = service_key(k);
      if (!s) throw ConfigError(w + ".ttl_seconds: unknown service \"" + k + "\"");
      t.ttl_by_service[*s] = get<std::uint64_t>(v, w + ".ttl_seconds." + k);
    }
  }
  if (j.contains("ttl_mode")) {
    auto m = get<std::string>(j["ttl_mode"], w + ".ttl_mode");
    if (m == "insert_time") {
      t.ttl_mode = TtlMode::InsertTime;
    } else if (m == "last_access") {
      t.ttl_mode = TtlMode::LastAccess;
    } else {
      throw ConfigError(w + ".ttl_mode: expected \"insert_time\" or \"last_access\"");
    }
  }
  if (j.contains("latency")) {
    const json& l = j["latency"];
    const std::string lw = w + ".latency";
    check_keys(l, lw, {"t_local", "t_edge", "t_regional", "t_origin", "bw_local", "bw_edge", "bw_regional", "bw_origin"});
    auto& m = t.latency;
    maybe(l, "t_local", lw, m.t_local);
    maybe(l, "t_edge", lw, m.t_edge);
    maybe(l, "t_regional", lw, m.t_regional);
    maybe(l, "t_origin", lw, m.t_origin);
    maybe(l, "bw_local", lw, m.bw_local);
    maybe(l, "bw_edge", lw, m.bw_edge);
    maybe(l, "bw_regional", lw, m.bw_regional);
    maybe(l, "bw_origin", lw, m.bw_origin);
  }
  t.validate();
}

std::pair<std::uint8_t, std::uint8_t> parse_prefix(const std::string& s, const std::string& where) {
  auto ip = IpAddress::parse(s + ".0.0");
  if (!ip || !ip->is_v4()) throw ConfigError(where + ": expected \"a.b\"");
  auto text = ip->to_string();
  auto dot1 = text.find('.');
  auto dot2 = text.find('.', dot1 + 1);
  return {static_cast<std::uint8_t>(std::stoi(text.substr(0, dot1))),
          static_cast<std::uint8_t>(std::stoi(text.substr(dot1 + 1, dot2 - dot1 - 1)))};
}

void parse_workload(const json& j, WorkloadConfig& cfg) {
  const std::string w = "workload";
  check_keys(j, w, {"seed", "start_unix_ms", "utc_offset_minutes", "duration_hours", "requests_per_day", "classes",
                    "hourly_weights", "ip_pool_size", "isps", "provinces", "country"});
  maybe(j, "seed", w, cfg.seed);
  maybe(j, "start_unix_ms", w, cfg.start_unix_ms);
  maybe(j, "utc_offset_minutes", w, cfg.utc_offset_minutes);
  maybe(j, "duration_hours", w, cfg.duration_hours);
  maybe(j, "requests_per_day", w, cfg.requests_per_day);
  maybe(j, "ip_pool_size", w, cfg.ip_pool_size);
  maybe(j, "country", w, cfg.country);
  if (j.contains("classes")) {
    const json& cls = j["classes"];
    require_object(cls, w + ".classes");
    for (const auto& [name, body] : cls.items()) {
      const TrafficClass* match = nullptr;
      for (const auto& c : kAllTrafficClasses) {
        if (to_string(c) == name) match = &c;
      }
      const std::string cw = w + ".classes." + name;
      if (!match) throw ConfigError(w + ".classes: unknown class \"" + name + "\"");
      check_keys(body, cw, {"mix", "catalog_size", "zipf_exponent", "size_quartiles_mb", "size_lognormal", "extensions"});
      ClassWorkload& c = cfg.classes[static_cast<std::size_t>(*match)];
      maybe(body, "mix", cw, c.mix);
      maybe(body, "catalog_size", cw, c.catalog_size);
      maybe(body, "zipf_exponent", cw, c.zipf_exponent);
      if (body.contains("size_quartiles_mb")) {
        const json& q = body["size_quartiles_mb"];
        if (!q.is_array() || q.size() != 3) throw ConfigError(cw + ".size_quartiles_mb: expected [q1, median, q3]");
        try {
          c.size_mb = fit_lognormal(get<double>(q[0], cw), get<double>(q[1], cw), get<double>(q[2], cw));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(cw + ".size_quartiles_mb: " + e.what());
        }
      }
      if (body.contains("size_lognormal")) {
        const json& l = body["size_lognormal"];
        check_keys(l, cw + ".size_lognormal", {"mu", "sigma"});
        maybe(l, "mu", cw + ".size_lognormal", c.size_mb.mu);
        maybe(l, "sigma", cw + ".size_lognormal", c.size_mb.sigma);
      }
      if (body.contains("extensions")) {
        require_object(body["extensions"], cw + ".extensions");
        c.extensions.clear();
        for (const auto& [ext, weight] : body["extensions"].items()) {
          c.extensions.emplace_back(ext, get<double>(weight, cw + ".extensions." + ext));
        }
      }
    }
  }
  if (j.contains("hourly_weights")) {
    const json& h = j["hourly_weights"];
    if (!h.is_array() || h.size() != 24) throw ConfigError(w + ".hourly_weights: expected 24 numbers");
    for (std::size_t i = 0; i < 24; ++i) cfg.hourly_weights[i] = get<double>(h[i], w + ".hourly_weights");
  }
  if (j.contains("isps")) {
    const json& a = j["isps"];
    if (!a.is_array()) throw ConfigError(w + ".isps: expected an array");
    cfg.isps.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string iw = w + ".isps[" + std::to_string(i) + "]";
      check_keys(a[i], iw, {"name", "weight", "prefix"});
      IspBlock b;
      b.name = get<std::string>(a[i].value("name", json()), iw + ".name");
      b.weight = get<double>(a[i].value("weight", json()), iw + ".weight");
      std::tie(b.first_octet, b.second_octet) = parse_prefix(get<std::string>(a[i].value("prefix", json()), iw + ".prefix"), iw + ".prefix");
      cfg.isps.push_back(std::move(b));
    }
  }
  if (j.contains("provinces")) {
    const json& a = j["provinces"];
    if (!a.is_array()) throw ConfigError(w + ".provinces: expected an array");
    cfg.provinces.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string pw = w + ".provinces[" + std::to_string(i) + "]";
      check_keys(a[i], pw, {"name", "weight"});
      cfg.provinces.push_back({get<std::string>(a[i].value("name", json()), pw + ".name"),
                               get<double>(a[i].value("weight", json()), pw + ".weight")});
    }
  }
  cfg.validate();
}

void parse_report(const json& j, ReportOptions& r) {
  const std::string w = "report";
  check_keys(j, w, {"groups", "include_local_in_system", "exact_quantile_limit", "reservoir_size"});
  if (j.contains("groups")) {
    r.groups.clear();
    for (const auto& g : string_list(j["groups"], w + ".groups")) {
      auto k = parse_group_key(g);
      if (!k) throw ConfigError(w + ".groups: unknown group \"" + g + "\"");
      if (std::find(r.groups.begin(), r.groups.end(), *k) == r.groups.end()) r.groups.push_back(*k);
    }
  }
  maybe(j, "include_local_in_system", w, r.include_local_in_system);
  maybe(j, "exact_quantile_limit", w, r.exact_quantile_limit);
  maybe(j, "reservoir_size", w, r.reservoir_size);
  if (r.reservoir_size == 0) throw ConfigError(w + ".reservoir_size must be > 0");
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "config", {"patterns", "geo", "topology", "workload", "report"});
  RunConfig cfg;
  if (j.contains("patterns")) parse_patterns(j["patterns"], cfg.patterns);
  if (j.contains("geo")) parse_geo(j["geo"], cfg.geo, base_dir);
  if (j.contains("topology")) parse_topology(j["topology"], cfg.topology);
  if (j.contains("workload")) parse_workload(j["workload"], cfg.workload);
  if (j.contains("report")) parse_report(j["report"], cfg.report);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace cdnlog
