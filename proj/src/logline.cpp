#include "cdnlog/logline.hpp"

#include <algorithm>
#if defined(__SSE2__)
#include <emmintrin.h>
#endif
#include <charconv>
#include <cstring>
#include <limits>
#include <cstdio>
#include <thread>

#include <json.hpp>

namespace cdnlog {

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

constexpr bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

// Fixed-width run of decimal digits.
bool fixed_digits(std::string_view s, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

// Offsets of the first `cap` ", " separators in text; returns the total.
std::size_t find_separators(std::string_view text, std::uint32_t* out, std::size_t cap) {
  const char* d = text.data();
  const std::size_t n = text.size();
  std::size_t count = 0;
  std::size_t i = 0;
#if defined(__SSE2__)
  const __m128i comma = _mm_set1_epi8(',');
  const __m128i space = _mm_set1_epi8(' ');
  for (; i + 17 <= n; i += 16) {
    __m128i a = _mm_loadu_si128(reinterpret_cast<const __m128i*>(d + i));
    __m128i b = _mm_loadu_si128(reinterpret_cast<const __m128i*>(d + i + 1));
    auto mask = static_cast<unsigned>(
        _mm_movemask_epi8(_mm_and_si128(_mm_cmpeq_epi8(a, comma), _mm_cmpeq_epi8(b, space))));
    while (mask != 0) {
      if (count < cap) out[count] = static_cast<std::uint32_t>(i + static_cast<std::size_t>(__builtin_ctz(mask)));
      ++count;
      mask &= mask - 1;
    }
  }
#endif
  for (; i + 1 < n; ++i) {
    if (d[i] == ',' && d[i + 1] == ' ') {
      if (count < cap) out[count] = static_cast<std::uint32_t>(i);
      ++count;
    }
  }
  return count;
}

// Reference path for lines with many separators.
std::size_t split_fields_scalar(std::string_view text, std::span<std::string_view> out, std::size_t& count) {
  while (!text.empty() && is_blank(text.back())) text.remove_suffix(1);
  count = 0;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (true) {
    std::size_t start = pos;
    while (start < n && text[start] == ' ') ++start;
    std::size_t search_from = pos;
    if (start < n && text[start] == '[') {
      std::size_t close = text.find(']', start + 1);
      if (close == std::string_view::npos) return start;
      search_from = close + 1;
    }
    std::size_t sep = std::string_view::npos;
    const char* const d = text.data();
    for (std::size_t i = search_from; i + 1 < n; ++i) {
      if (d[i] == ',' && d[i + 1] == ' ') {
        sep = i;
        break;
      }
    }
    std::size_t end = sep == std::string_view::npos ? n : sep;
    if (count < out.size()) out[count] = trim(text.substr(pos, end - pos));
    ++count;
    if (sep == std::string_view::npos) break;
    pos = sep + 2;
  }
  return std::string_view::npos;
}


// Splits into at most `out.size()` stored tokens; `count` receives the total.
// Returns the offset of an unmatched '[' or npos on success.
std::size_t split_fields(std::string_view text, std::span<std::string_view> out, std::size_t& count) {
  while (!text.empty() && is_blank(text.back())) text.remove_suffix(1);
  constexpr std::size_t kCap = 64;
  std::uint32_t seps[kCap];
  const std::size_t total = text.size() > UINT32_MAX ? kCap + 1 : find_separators(text, seps, kCap);
  if (total > kCap) return split_fields_scalar(text, out, count);
  count = 0;
  std::size_t pos = 0;
  std::size_t k = 0;
  const std::size_t n = text.size();
  while (true) {
    std::size_t start = pos;
    while (start < n && text[start] == ' ') ++start;
    std::size_t search_from = pos;
    if (start < n && text[start] == '[') {
      std::size_t close = text.find(']', start + 1);
      if (close == std::string_view::npos) return start;
      search_from = close + 1;
    }
    while (k < total && seps[k] < search_from) ++k;
    std::size_t end = k < total ? seps[k] : n;
    if (count < out.size()) out[count] = trim(text.substr(pos, end - pos));
    ++count;
    if (k == total) break;
    pos = end + 2;
    ++k;
  }
  return std::string_view::npos;
}

std::optional<std::int64_t> parse_latency(std::string_view s) {
  std::size_t dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  if (whole.empty() || whole.size() > 12) return std::nullopt;
  std::int64_t ms = 0;
  for (char c : whole) {
    if (c < '0' || c > '9') return std::nullopt;
    ms = ms * 10 + (c - '0');
  }
  ms *= 1000;
  if (dot != std::string_view::npos) {
    std::string_view frac = s.substr(dot + 1);
    if (frac.empty() || frac.size() > 3) return std::nullopt;
    std::int64_t scale = 100;
    for (char c : frac) {
      if (c < '0' || c > '9') return std::nullopt;
      ms += (c - '0') * scale;
      scale /= 10;
    }
  }
  return ms;
}

std::optional<std::uint64_t> parse_size(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  // Sizes feed signed aggregates.
  if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) return std::nullopt;
  return v;
}

CleanResult clean_range(std::span<const std::string_view> lines) {
  CleanResult out;
  out.records.reserve(lines.size());
  for (auto line : lines) {
    auto parsed = parse_line(line);
    if (auto* rec = std::get_if<LogRecord>(&parsed)) {
      out.records.push_back(std::move(*rec));
      out.stats.record_accept();
    } else {
      out.stats.record_reject(std::get<ParseError>(parsed).reason);
    }
  }
  return out;
}

}  // namespace

std::string_view to_wire(HitStatus s) {
  switch (s) {
    case HitStatus::Miss: return "MISS";
    case HitStatus::Hit: return "HIT";
    case HitStatus::Hit1: return "HIT1";
    case HitStatus::Local: return "-";
  }
  return "?";
}

std::optional<HitStatus> parse_hit_status(std::string_view token) {
  if (token == "MISS") return HitStatus::Miss;
  if (token == "HIT") return HitStatus::Hit;
  if (token == "HIT1") return HitStatus::Hit1;
  if (token == "-") return HitStatus::Local;
  return std::nullopt;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::FieldCount: return "field_count";
    case RejectReason::BadLatency: return "bad_latency";
    case RejectReason::BadIp: return "bad_ip";
    case RejectReason::BadStatus: return "bad_status";
    case RejectReason::BadTimestamp: return "bad_timestamp";
    case RejectReason::BadSize: return "bad_size";
    case RejectReason::EmptyPath: return "empty_path";
  }
  return "unknown";
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(int year, int month, int day) {
  std::int64_t y = year - (month <= 2 ? 1 : 0);
  std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  std::int64_t yoe = y - era * 400;
  std::int64_t mp = (month + 9) % 12;
  std::int64_t doy = (153 * mp + 2) / 5 + day - 1;
  std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

CivilTime civil_from_local_seconds(std::int64_t local_seconds) {
  std::int64_t days = local_seconds / 86400;
  std::int64_t secs = local_seconds % 86400;
  if (secs < 0) {
    secs += 86400;
    --days;
  }
  std::int64_t z = days + 719468;
  std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  std::int64_t doe = z - era * 146097;
  std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  std::int64_t mp = (5 * doy + 2) / 153;
  int d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  int m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  int y = static_cast<int>(yoe + era * 400 + (m <= 2 ? 1 : 0));
  return {y, m, d, static_cast<int>(secs / 3600), static_cast<int>(secs % 3600 / 60), static_cast<int>(secs % 60)};
}

Timestamp Timestamp::from_unix(std::int64_t unix_seconds, std::int32_t utc_offset_minutes) {
  return {unix_seconds + std::int64_t{utc_offset_minutes} * 60, utc_offset_minutes};
}

namespace {

std::optional<Timestamp> parse_timestamp_uncached(std::string_view s) {
  // 0         1         2
  // 0123456789012345678901234567
  // 03/Dec/2018:00:00:00 +0700
  if (s.size() < 26) return std::nullopt;
  int day, year, hour, minute, second;
  if (!fixed_digits(s, 0, 2, day) || s[2] != '/') return std::nullopt;
  auto mon = std::find(kMonths.begin(), kMonths.end(), s.substr(3, 3));
  if (mon == kMonths.end() || s[6] != '/') return std::nullopt;
  int month = static_cast<int>(mon - kMonths.begin()) + 1;
  if (!fixed_digits(s, 7, 4, year) || s[11] != ':') return std::nullopt;
  if (!fixed_digits(s, 12, 2, hour) || s[14] != ':') return std::nullopt;
  if (!fixed_digits(s, 15, 2, minute) || s[17] != ':') return std::nullopt;
  if (!fixed_digits(s, 18, 2, second)) return std::nullopt;

  std::size_t pos = 20;
  if (s[pos] == ',') ++pos;
  if (pos >= s.size() || s[pos] != ' ') return std::nullopt;
  ++pos;
  if (s.size() != pos + 5) return std::nullopt;
  char sign = s[pos];
  if (sign != '+' && sign != '-') return std::nullopt;
  int off_h, off_m;
  if (!fixed_digits(s, pos + 1, 2, off_h) || !fixed_digits(s, pos + 3, 2, off_m)) return std::nullopt;

  if (month < 1 || day < 1 || day > days_in_month(year, month)) return std::nullopt;
  if (hour > 23 || minute > 59 || second > 59 || off_h > 23 || off_m > 59) return std::nullopt;

  std::int32_t offset = (off_h * 60 + off_m) * (sign == '-' ? -1 : 1);
  std::int64_t local = days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
  return Timestamp{local, offset};
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  // Log lines arrive in time order, so most timestamps repeat the previous one.
  thread_local char last_text[32];
  thread_local std::size_t last_size = 0;
  thread_local std::optional<Timestamp> last;
  if (s.size() == last_size && std::memcmp(s.data(), last_text, last_size) == 0) return last;
  auto parsed = parse_timestamp_uncached(s);
  if (s.size() <= sizeof(last_text)) {
    std::memcpy(last_text, s.data(), s.size());
    last_size = s.size();
    last = parsed;
  }
  return parsed;
}

namespace {

char* put2(char* p, int v) {
  *p++ = static_cast<char>('0' + v / 10);
  *p++ = static_cast<char>('0' + v % 10);
  return p;
}

}  // namespace

namespace {

void append_timestamp_uncached(std::string& out, const Timestamp& ts) {
  CivilTime c = civil_from_local_seconds(ts.local_seconds);
  int off = ts.utc_offset_minutes;
  char sign = off < 0 ? '-' : '+';
  if (off < 0) off = -off;
  char buf[48];
  if (c.year < 0 || c.year > 9999 || off >= 100 * 60) {
    int n = std::snprintf(buf, sizeof(buf), "%02d/%s/%04d:%02d:%02d:%02d %c%02d%02d", c.day,
                          kMonths[c.month - 1].data(), c.year, c.hour, c.minute, c.second, sign, off / 60,
                          off % 60);
    out.append(buf, static_cast<std::size_t>(n));
    return;
  }
  char* p = put2(buf, c.day);
  *p++ = '/';
  p = std::copy(kMonths[c.month - 1].begin(), kMonths[c.month - 1].end(), p);
  *p++ = '/';
  p = put2(put2(p, c.year / 100), c.year % 100);
  *p++ = ':';
  p = put2(p, c.hour);
  *p++ = ':';
  p = put2(p, c.minute);
  *p++ = ':';
  p = put2(p, c.second);
  *p++ = ' ';
  *p++ = sign;
  p = put2(put2(p, off / 60), off % 60);
  out.append(buf, p);
}

}  // namespace

void append_timestamp(std::string& out, const Timestamp& ts) {
  thread_local Timestamp last{std::numeric_limits<std::int64_t>::min(), 0};
  thread_local char last_text[48];
  thread_local std::size_t last_size = 0;
  if (ts == last) {
    out.append(last_text, last_size);
    return;
  }
  const std::size_t start = out.size();
  append_timestamp_uncached(out, ts);
  last_size = std::min(out.size() - start, sizeof(last_text));
  std::memcpy(last_text, out.data() + start, last_size);
  last = ts;
}

std::string format_timestamp(const Timestamp& ts) {
  std::string out;
  append_timestamp(out, ts);
  return out;
}

void append_latency(std::string& out, std::int64_t latency_ms) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), latency_ms / 1000);
  auto frac = static_cast<int>(latency_ms % 1000);
  *p++ = '.';
  *p++ = static_cast<char>('0' + frac / 100);
  p = put2(p, frac % 100);
  out.append(buf, p);
}

bool is_serializable_path(std::string_view path) {
  if (path.empty() || path.front() == '[') return false;
  if (is_blank(path.front()) || is_blank(path.back())) return false;
  if (path.find(", ") != std::string_view::npos) return false;
  return std::none_of(path.begin(), path.end(), [](char c) { return static_cast<unsigned char>(c) < 0x20 || c == 0x7f; });
}

TokenizeResult tokenize_line(std::string_view text) {
  std::vector<std::string_view> tokens(8);
  std::size_t count = 0;
  while (true) {
    std::size_t err = split_fields(text, tokens, count);
    if (err != std::string_view::npos) return TokenizeError{err};
    if (count <= tokens.size()) break;
    tokens.resize(count);
  }
  tokens.resize(count);
  return tokens;
}

std::optional<RejectReason> parse_line_into(std::string_view text, LogRecord& r) {
  std::array<std::string_view, 6> f;
  std::size_t count = 0;
  if (split_fields(text, f, count) != std::string_view::npos || count != 6) return RejectReason::FieldCount;

  auto latency = parse_latency(f[0]);
  if (!latency) return RejectReason::BadLatency;
  auto ip = IpAddress::parse(f[1]);
  if (!ip) return RejectReason::BadIp;
  auto status = parse_hit_status(f[2]);
  if (!status) return RejectReason::BadStatus;
  std::string_view ts = f[3];
  if (ts.size() < 2 || ts.front() != '[' || ts.back() != ']') return RejectReason::BadTimestamp;
  auto parsed_ts = parse_timestamp(ts.substr(1, ts.size() - 2));
  if (!parsed_ts) return RejectReason::BadTimestamp;
  auto size = parse_size(f[5]);
  if (!size) return RejectReason::BadSize;
  if (f[4].empty()) return RejectReason::EmptyPath;

  r.latency_ms = *latency;
  r.client_ip = *ip;
  r.status = *status;
  r.timestamp = *parsed_ts;
  r.size_bytes = *size;
  r.content_path.assign(f[4]);
  return std::nullopt;
}

ParseResult parse_line(std::string_view text) {
  LogRecord r;
  if (auto reason = parse_line_into(text, r)) return ParseError{*reason};
  return r;
}

void append_record(std::string& out, const LogRecord& r) {
  append_latency(out, r.latency_ms);
  out += ", ";
  r.client_ip.append_to(out);
  out += ", ";
  out += to_wire(r.status);
  out += ", [";
  append_timestamp(out, r.timestamp);
  out += "], ";
  out += r.content_path;
  out += ", ";
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), r.size_bytes);
  out.append(buf, end);
}

std::string format_record(const LogRecord& r) {
  std::string out;
  out.reserve(96 + r.content_path.size());
  append_record(out, r);
  return out;
}

RejectionStats& RejectionStats::operator+=(const RejectionStats& o) {
  total_lines += o.total_lines;
  accepted += o.accepted;
  rejected += o.rejected;
  for (std::size_t i = 0; i < kRejectReasonCount; ++i) rejected_by_reason[i] += o.rejected_by_reason[i];
  return *this;
}

std::string RejectionStats::to_json() const {
  nlohmann::ordered_json reasons = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
    reasons[std::string(to_string(static_cast<RejectReason>(i)))] = rejected_by_reason[i];
  }
  nlohmann::ordered_json j;
  j["total_lines"] = total_lines;
  j["accepted"] = accepted;
  j["rejected"] = rejected;
  j["rejected_by_reason"] = reasons;
  return j.dump(2);
}

CleanResult clean_stream(std::span<const std::string_view> lines) { return clean_range(lines); }

CleanResult clean_stream(std::span<const std::string> lines) {
  std::vector<std::string_view> views(lines.begin(), lines.end());
  return clean_range(views);
}

CleanResult clean_parallel(std::span<const std::string_view> lines, unsigned threads) {
  threads = std::max(1u, threads);
  if (threads == 1 || lines.size() < 2 * threads) return clean_range(lines);

  std::vector<CleanResult> parts(threads);
  {
    std::vector<std::jthread> workers;
    std::size_t chunk = (lines.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      std::size_t begin = std::min(lines.size(), t * chunk);
      std::size_t end = std::min(lines.size(), begin + chunk);
      workers.emplace_back([&, t, begin, end] { parts[t] = clean_range(lines.subspan(begin, end - begin)); });
    }
  }
  CleanResult out = std::move(parts[0]);
  for (unsigned t = 1; t < threads; ++t) {
    out.stats += parts[t].stats;
    out.records.insert(out.records.end(), std::make_move_iterator(parts[t].records.begin()),
                       std::make_move_iterator(parts[t].records.end()));
  }
  return out;
}

}  // namespace cdnlog
