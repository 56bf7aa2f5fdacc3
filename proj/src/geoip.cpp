#include "cdnlog/geoip.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cdnlog/errors.hpp"
#include "cdnlog/io.hpp"

namespace cdnlog {

namespace {

constexpr std::string_view kInvalidMarker = "!";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename RowFn>
void for_each_csv_row(std::string_view text, const std::string& source, RowFn&& fn) {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    // Record end: first LF outside quotes.
    std::size_t end = pos;
    bool quoted = false;
    std::size_t first_line = line_no + 1;
    while (end < text.size() && (quoted || text[end] != '\n')) {
      if (text[end] == '"') quoted = !quoted;
      if (text[end] == '\n') ++line_no;
      ++end;
    }
    std::string_view line = text.substr(pos, end - pos);
    pos = end < text.size() ? end + 1 : end;
    ++line_no;
    if (quoted) throw InputError(source, first_line, "unterminated quote");
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    if (!csv_split(line, fields)) throw InputError(source, first_line, "malformed quoted field");
    fn(first_line, line, fields);
  }
}

std::string read_whole(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

std::string_view to_string(ResolverError::Kind k) {
  switch (k) {
    case ResolverError::Kind::NotFound: return "not_found";
    case ResolverError::Kind::Network: return "network";
    case ResolverError::Kind::Timeout: return "timeout";
    case ResolverError::Kind::HttpStatus: return "http_status";
    case ResolverError::Kind::BadResponse: return "bad_response";
  }
  return "unknown";
}

// --- CidrTableResolver ---

void CidrTableResolver::add(const Cidr& cidr, GeoInfo info) {
  bool v4 = cidr.network.is_v4();
  std::size_t slot = v4 ? static_cast<std::size_t>(cidr.prefix_len) : 33 + static_cast<std::size_t>(cidr.prefix_len);
  auto [it, inserted] = by_prefix_[slot].insert_or_assign(cidr.network, std::move(info));
  if (!inserted) return;
  ++entries_;
  auto& lengths = v4 ? lengths_v4_ : lengths_v6_;
  if (std::find(lengths.begin(), lengths.end(), cidr.prefix_len) == lengths.end()) {
    lengths.push_back(cidr.prefix_len);
    std::sort(lengths.rbegin(), lengths.rend());
  }
}

ResolveResult CidrTableResolver::resolve(const IpAddress& ip) {
  const bool v4 = ip.is_v4();
  for (int len : v4 ? lengths_v4_ : lengths_v6_) {
    const auto& table = by_prefix_[v4 ? static_cast<std::size_t>(len) : 33 + static_cast<std::size_t>(len)];
    auto it = table.find(ip.masked(len));
    if (it != table.end()) return it->second;
  }
  return ResolverError{ResolverError::Kind::NotFound, false, "no CIDR covers " + ip.to_string()};
}

CidrTableResolver CidrTableResolver::from_csv(std::string_view text, const std::string& source_name) {
  CidrTableResolver table;
  for_each_csv_row(text, source_name, [&](std::size_t line_no, std::string_view, const std::vector<std::string>& f) {
    if (line_no == 1 && !f.empty() && trim(f[0]) == "cidr") return;
    if (f.size() != 4) throw InputError(source_name, line_no, "expected cidr,isp,province,country");
    auto cidr = Cidr::parse(trim(f[0]));
    if (!cidr) throw InputError(source_name, line_no, "bad CIDR '" + f[0] + "'");
    table.add(*cidr, GeoInfo{std::string(trim(f[1])), std::string(trim(f[2])), std::string(trim(f[3]))});
  });
  return table;
}

CidrTableResolver CidrTableResolver::load(const std::filesystem::path& path) {
  return from_csv(read_whole(path), path.string());
}

// --- SynonymTable / normalization ---

void SynonymTable::add(std::string variant, std::string canonical) {
  if (variant == canonical) {
    canonicals_.insert(std::move(canonical));
    return;
  }
  if (map_.count(canonical) != 0) {
    throw ConfigError("synonym target '" + canonical + "' is itself mapped to '" + map_.at(canonical) + "'");
  }
  if (canonicals_.count(variant) != 0) {
    throw ConfigError("synonym source '" + variant + "' is already used as a canonical name");
  }
  auto existing = map_.find(variant);
  if (existing != map_.end() && existing->second != canonical) {
    throw ConfigError("synonym '" + variant + "' mapped to both '" + existing->second + "' and '" + canonical + "'");
  }
  canonicals_.insert(canonical);
  map_.insert_or_assign(std::move(variant), std::move(canonical));
}

const std::string& SynonymTable::canonical(const std::string& name) const {
  auto it = map_.find(name);
  return it == map_.end() ? name : it->second;
}

SynonymTable SynonymTable::from_csv(std::string_view text, const std::string& source_name) {
  SynonymTable table;
  for_each_csv_row(text, source_name, [&](std::size_t line_no, std::string_view, const std::vector<std::string>& f) {
    if (line_no == 1 && f.size() == 2 && trim(f[0]) == "variant" && trim(f[1]) == "canonical") return;
    if (f.size() != 2) throw InputError(source_name, line_no, "expected variant,canonical");
    std::string variant(trim(f[0]));
    std::string canonical(trim(f[1]));
    if (variant.empty() || canonical.empty()) throw InputError(source_name, line_no, "empty synonym");
    try {
      table.add(std::move(variant), std::move(canonical));
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return table;
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
  return from_csv(read_whole(path), path.string());
}

GeoOutcome normalize(const GeoInfo& raw, const SynonymTable& syn, const std::unordered_set<std::string>& deny_list) {
  GeoInfo out{raw.isp, syn.canonical(raw.province), syn.canonical(raw.country)};
  for (const std::string* field : {&out.isp, &out.province, &out.country}) {
    if (field->empty() || deny_list.count(*field) != 0) return std::nullopt;
  }
  return out;
}

GeoOutcome GeoNormalizer::normalize(const GeoInfo& raw) const { return cdnlog::normalize(raw, synonyms, deny_list); }

// --- GeoCache ---

GeoCache::GeoCache(const GeoCache& other) {
  std::shared_lock lock(other.mu_);
  entries_ = other.entries_;
}

GeoCache& GeoCache::operator=(const GeoCache& other) {
  if (this == &other) return *this;
  std::unordered_map<IpAddress, GeoOutcome, IpAddressHash> copy;
  {
    std::shared_lock lock(other.mu_);
    copy = other.entries_;
  }
  std::unique_lock lock(mu_);
  entries_ = std::move(copy);
  return *this;
}

std::optional<GeoOutcome> GeoCache::find(const IpAddress& ip) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(ip);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GeoCache::store(const IpAddress& ip, GeoOutcome outcome) {
  std::unique_lock lock(mu_);
  entries_.insert_or_assign(ip, std::move(outcome));
}

std::size_t GeoCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::map<IpAddress, GeoOutcome> GeoCache::snapshot() const {
  std::shared_lock lock(mu_);
  return {entries_.begin(), entries_.end()};
}

std::string GeoCache::to_csv() const {
  std::string out;
  auto field = [&](const std::string& v) {
    if (v == kInvalidMarker) {
      out += "\"!\"";
    } else {
      out += csv_escape(v);
    }
  };
  for (const auto& [ip, outcome] : snapshot()) {
    ip.append_to(out);
    if (!outcome) {
      out += ",!,!,!\n";
      continue;
    }
    out += ',';
    field(outcome->isp);
    out += ',';
    field(outcome->province);
    out += ',';
    field(outcome->country);
    out += '\n';
  }
  return out;
}

GeoCache GeoCache::from_csv(std::string_view text, const std::string& source_name) {
  GeoCache cache;
  for_each_csv_row(text, source_name, [&](std::size_t line_no, std::string_view raw, const std::vector<std::string>& f) {
    if (f.size() != 4) throw InputError(source_name, line_no, "expected ip,isp,province,country");
    auto ip = IpAddress::parse(f[0]);
    if (!ip) throw InputError(source_name, line_no, "bad IP address '" + f[0] + "'");
    // The invalid marker is only recognized unquoted.
    std::string_view rest = raw.substr(raw.find(',') + 1);
    if (rest == "!,!,!") {
      cache.entries_.insert_or_assign(*ip, std::nullopt);
      return;
    }
    cache.entries_.insert_or_assign(*ip, GeoInfo{f[1], f[2], f[3]});
  });
  return cache;
}

void save_cache(const GeoCache& cache, const std::filesystem::path& path) { write_file_atomic(path, cache.to_csv()); }

GeoCache load_cache(const std::filesystem::path& path) { return GeoCache::from_csv(read_whole(path), path.string()); }

// --- lookup ---

LookupResult lookup(const IpAddress& ip, GeoCache& cache, Resolver& resolver, const GeoNormalizer& normalizer) {
  if (auto cached = cache.find(ip)) {
    if (*cached) return **cached;
    return Invalid{};
  }
  ResolveResult raw = resolver.resolve(ip);
  if (auto* err = std::get_if<ResolverError>(&raw)) {
    if (err->retryable) return *err;
    cache.store(ip, std::nullopt);
    return Invalid{};
  }
  GeoOutcome normalized = normalizer.normalize(std::get<GeoInfo>(raw));
  cache.store(ip, normalized);
  if (normalized) return *normalized;
  return Invalid{};
}

}  // namespace cdnlog
