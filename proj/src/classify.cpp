#include "cdnlog/classify.hpp"

#include <algorithm>

#include "cdnlog/errors.hpp"
#include "cdnlog/hash.hpp"

namespace cdnlog {

namespace {

constexpr char lower(char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; }

bool contains_icase(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                        [](char a, char b) { return lower(a) == lower(b); });
  return it != haystack.end();
}

bool equals_icase(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

bool is_hex(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F'); }

}  // namespace

std::string_view to_string(ServiceClass s) {
  switch (s) {
    case ServiceClass::LiveStreaming: return "live";
    case ServiceClass::VideoOnDemand: return "vod";
    case ServiceClass::Website: return "website";
  }
  return "?";
}

std::string_view to_string(PackagingClass p) { return p == PackagingClass::Packaged ? "yes" : "no"; }

std::optional<ServiceClass> parse_service_class(std::string_view token) {
  for (auto s : kAllServiceClasses) {
    if (token == to_string(s)) return s;
  }
  return std::nullopt;
}

std::optional<PackagingClass> parse_packaging_class(std::string_view token) {
  if (token == "yes" || token == "1") return PackagingClass::Packaged;
  if (token == "no" || token == "0") return PackagingClass::NonPackaged;
  return std::nullopt;
}

void PatternConfig::validate() const {
  if (live_patterns.empty()) throw ConfigError("patterns.live_patterns must not be empty");
  if (streaming_extensions.empty()) throw ConfigError("patterns.streaming_extensions must not be empty");
  for (const auto& p : live_patterns) {
    if (p.empty()) throw ConfigError("patterns.live_patterns contains an empty pattern");
  }
  for (const auto& e : streaming_extensions) {
    if (e.size() < 2 || e.front() != '.') throw ConfigError("streaming extension must look like \".ext\": " + e);
  }
}

std::string extension_of(std::string_view path) {
  auto slash = path.rfind('/');
  std::string_view segment = slash == std::string_view::npos ? path : path.substr(slash + 1);
  auto dot = segment.rfind('.');
  if (dot == std::string_view::npos) return {};
  std::string ext(segment.substr(dot));
  for (char& c : ext) c = lower(c);
  return ext;
}

std::string_view content_identity(std::string_view path, const PatternConfig& cfg) {
  if (!cfg.strip_session_token || path.size() < 2 || path.front() != '/') return path;
  auto next = path.find('/', 1);
  if (next == std::string_view::npos) return path;
  std::string_view first = path.substr(1, next - 1);
  if (first.size() < 32 || !std::all_of(first.begin(), first.end(), is_hex)) return path;
  return path.substr(next);
}

ServiceClass classify_service(std::string_view content_path, const PatternConfig& cfg) {
  for (const auto& pattern : cfg.live_patterns) {
    if (contains_icase(content_path, pattern)) return ServiceClass::LiveStreaming;
  }
  auto slash = content_path.rfind('/');
  std::string_view segment = slash == std::string_view::npos ? content_path : content_path.substr(slash + 1);
  auto dot = segment.rfind('.');
  if (dot != std::string_view::npos) {
    std::string_view ext = segment.substr(dot);
    for (const auto& candidate : cfg.streaming_extensions) {
      if (equals_icase(ext, candidate)) return ServiceClass::VideoOnDemand;
    }
  }
  return ServiceClass::Website;
}

std::size_t ContentMissSet::StringHash::operator()(std::string_view s) const noexcept {
  return std::hash<std::string_view>{}(s);
}

void ContentMissSet::insert(std::string_view identity) {
  if (hashed_) {
    hashes_.insert(fnv1a64(identity));
    return;
  }
  if (exact_.find(identity) == exact_.end()) {
    exact_.emplace(identity);
    if (exact_.size() > hash_threshold_) switch_to_hashes();
  }
}

bool ContentMissSet::contains(std::string_view identity) const {
  if (hashed_) return hashes_.count(fnv1a64(identity)) != 0;
  return exact_.find(identity) != exact_.end();
}

void ContentMissSet::switch_to_hashes() {
  hashes_.reserve(exact_.size() * 2);
  for (const auto& s : exact_) hashes_.insert(fnv1a64(s));
  exact_.clear();
  exact_.rehash(0);
  hashed_ = true;
}

void ContentMissSet::merge(const ContentMissSet& other) {
  if (other.hashed_ && !hashed_) switch_to_hashes();
  if (other.hashed_) {
    hashes_.insert(other.hashes_.begin(), other.hashes_.end());
    return;
  }
  for (const auto& s : other.exact_) insert(s);
}

ContentMissSet build_miss_set(std::span<const LogRecord> records, const PatternConfig& cfg) {
  ContentMissSet set(cfg.hash_threshold);
  for (const auto& r : records) {
    if (r.status == HitStatus::Miss) set.insert(content_identity(r.content_path, cfg));
  }
  return set;
}

PackagingClass classify_packaging(std::string_view content_path, const ContentMissSet& miss_set,
                                  const PatternConfig& cfg) {
  return miss_set.contains(content_identity(content_path, cfg)) ? PackagingClass::NonPackaged
                                                                 : PackagingClass::Packaged;
}

std::uint64_t ClassCounts::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

ClassCounts& ClassCounts::operator+=(const ClassCounts& o) {
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
  return *this;
}

std::string ClassCounts::to_csv() const {
  std::string out = "service,packaging,count\n";
  for (auto s : kAllServiceClasses) {
    for (auto p : {PackagingClass::NonPackaged, PackagingClass::Packaged}) {
      auto n = get(s, p);
      if (n == 0) continue;
      out += to_string(s);
      out += ',';
      out += to_string(p);
      out += ',';
      out += std::to_string(n);
      out += '\n';
    }
  }
  return out;
}

ClassifyResult classify_stream(std::vector<LogRecord>&& records, const PatternConfig& cfg) {
  ContentMissSet miss = build_miss_set(records, cfg);
  ClassifyResult out;
  out.records.reserve(records.size());
  for (auto& r : records) {
    ClassifiedRecord c;
    c.service = classify_service(r.content_path, cfg);
    c.packaging = classify_packaging(r.content_path, miss, cfg);
    out.counts.add(c.service, c.packaging);
    c.record = std::move(r);
    out.records.push_back(std::move(c));
  }
  return out;
}

ClassifyResult classify_stream(std::span<const LogRecord> records, const PatternConfig& cfg) {
  return classify_stream(std::vector<LogRecord>(records.begin(), records.end()), cfg);
}

}  // namespace cdnlog
