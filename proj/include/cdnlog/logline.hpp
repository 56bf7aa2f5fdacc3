#pragma once

// Parsing and canonical serialization of CDN access-log lines.
//
// Wire format, one request per line, six fields separated by ", ":
//
//   0.136, 118.68.222.40, MISS, [03/Dec/2018:00:00:00 +0700], /path/seg.ts, 437664
//
// latency (seconds, ms precision), client IP, hit status, bracketed local
// timestamp with numeric UTC offset, content path, response size in bytes.
// The timestamp may also carry a comma before the offset
// ("[03/Dec/2018:00:00:00, +0700]"); the separator is not split inside
// brackets.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cdnlog/ip_address.hpp"

namespace cdnlog {

enum class HitStatus : std::uint8_t {
  Miss,   // not cached anywhere; fetched from origin
  Hit,    // served by an edge cache
  Hit1,   // served by a regional cache
  Local,  // "-": satisfied by the client's own cache
};

inline constexpr std::array<HitStatus, 4> kAllHitStatuses = {HitStatus::Miss, HitStatus::Hit,
                                                             HitStatus::Hit1, HitStatus::Local};

std::string_view to_wire(HitStatus s);
std::optional<HitStatus> parse_hit_status(std::string_view token);

// Wall-clock time as written in the log: local seconds since 1970-01-01T00:00
// in the record's own zone, plus that zone's offset from UTC.
struct Timestamp {
  std::int64_t local_seconds = 0;
  std::int32_t utc_offset_minutes = 0;

  std::int64_t unix_seconds() const { return local_seconds - std::int64_t{utc_offset_minutes} * 60; }
  static Timestamp from_unix(std::int64_t unix_seconds, std::int32_t utc_offset_minutes);

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

struct CivilTime {
  int year, month, day, hour, minute, second;
};

std::int64_t days_from_civil(int year, int month, int day);
CivilTime civil_from_local_seconds(std::int64_t local_seconds);

// "DD/Mon/YYYY:HH:MM:SS +ZZZZ", optionally with ", " before the offset.
std::optional<Timestamp> parse_timestamp(std::string_view text);
// Canonical form, no brackets, no comma.
std::string format_timestamp(const Timestamp& ts);
void append_timestamp(std::string& out, const Timestamp& ts);
// Non-negative milliseconds as seconds with three decimals.
void append_latency(std::string& out, std::int64_t latency_ms);

struct LogRecord {
  std::int64_t latency_ms = 0;
  IpAddress client_ip;
  HitStatus status = HitStatus::Miss;
  Timestamp timestamp;
  std::string content_path;
  std::uint64_t size_bytes = 0;

  double latency_seconds() const { return static_cast<double>(latency_ms) / 1000.0; }

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

// A path can be written and read back unchanged: non-empty, no ", "
// separator, no control characters, no leading '[' and no surrounding
// blanks.
bool is_serializable_path(std::string_view path);

// Ordered by precedence: a line is rejected for the first failing check.
enum class RejectReason : std::uint8_t {
  FieldCount,
  BadLatency,
  BadIp,
  BadStatus,
  BadTimestamp,
  BadSize,
  EmptyPath,
};

inline constexpr std::size_t kRejectReasonCount = 7;
std::string_view to_string(RejectReason r);

struct ParseError {
  RejectReason reason;
  friend bool operator==(const ParseError&, const ParseError&) = default;
};

using ParseResult = std::variant<LogRecord, ParseError>;

struct TokenizeError {
  std::size_t bracket_offset;  // position of the unmatched '['
};

using TokenizeResult = std::variant<std::vector<std::string_view>, TokenizeError>;

// Splits on ", " outside of a bracketed span. A span opens only with a '['
// that starts a token. Trailing whitespace (including CR) on the line is
// ignored and each token is trimmed of surrounding blanks.
TokenizeResult tokenize_line(std::string_view text);

ParseResult parse_line(std::string_view text);
// Same rules as parse_line; on success overwrites `out`, reusing its path
// buffer. On failure `out` is left unchanged.
std::optional<RejectReason> parse_line_into(std::string_view text, LogRecord& out);

std::string format_record(const LogRecord& r);
void append_record(std::string& out, const LogRecord& r);

struct RejectionStats {
  std::uint64_t total_lines = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::array<std::uint64_t, kRejectReasonCount> rejected_by_reason{};

  void record_accept() {
    ++total_lines;
    ++accepted;
  }
  void record_reject(RejectReason r) {
    ++total_lines;
    ++rejected;
    ++rejected_by_reason[static_cast<std::size_t>(r)];
  }
  std::uint64_t rejected_for(RejectReason r) const { return rejected_by_reason[static_cast<std::size_t>(r)]; }

  RejectionStats& operator+=(const RejectionStats& o);
  friend bool operator==(const RejectionStats&, const RejectionStats&) = default;

  std::string to_json() const;
};

struct CleanResult {
  std::vector<LogRecord> records;
  RejectionStats stats;
};

CleanResult clean_stream(std::span<const std::string> lines);
CleanResult clean_stream(std::span<const std::string_view> lines);

// Parses `lines` on up to `threads` workers. Output order and stats match a
// sequential clean_stream over the same lines.
CleanResult clean_parallel(std::span<const std::string_view> lines, unsigned threads);

}  // namespace cdnlog
