#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cdnlog/logline.hpp"

namespace cdnlog {

enum class ServiceClass : std::uint8_t { LiveStreaming, VideoOnDemand, Website };
enum class PackagingClass : std::uint8_t { NonPackaged, Packaged };

inline constexpr std::array<ServiceClass, 3> kAllServiceClasses = {
    ServiceClass::LiveStreaming, ServiceClass::VideoOnDemand, ServiceClass::Website};

// Short tokens used in CSV/JSON: "live", "vod", "website"; "no", "yes".
std::string_view to_string(ServiceClass s);
std::string_view to_string(PackagingClass p);
std::optional<ServiceClass> parse_service_class(std::string_view token);
std::optional<PackagingClass> parse_packaging_class(std::string_view token);

struct PatternConfig {
  std::vector<std::string> live_patterns = {"live", "tv"};
  std::vector<std::string> streaming_extensions = {".ts", ".m3u8", ".mpd", ".dash"};
  // Strip a leading 32+ hex-digit session segment from the path when
  // deriving the content identity.
  bool strip_session_token = false;
  // ContentMissSet switches from exact strings to 64-bit hashes above this
  // many entries.
  std::size_t hash_threshold = std::numeric_limits<std::size_t>::max();

  // Throws ConfigError on empty pattern lists or empty patterns.
  void validate() const;
};

// Lowercased suffix starting at the last '.' of the last path segment, or ""
// when that segment has no '.'.
std::string extension_of(std::string_view path);

// The string that identifies a cached object.
std::string_view content_identity(std::string_view path, const PatternConfig& cfg);

ServiceClass classify_service(std::string_view content_path, const PatternConfig& cfg);

// Content identities seen with status MISS at least once.
//
// Starts in exact mode (strings). Once the set grows past the configured
// threshold it switches to storing FNV-1a 64-bit hashes; with n entries the
// probability of any false membership is about n^2 / 2^65 (~3e-8 for 10^6
// contents).
class ContentMissSet {
 public:
  explicit ContentMissSet(std::size_t hash_threshold = std::numeric_limits<std::size_t>::max())
      : hash_threshold_(hash_threshold) {}

  void insert(std::string_view identity);
  bool contains(std::string_view identity) const;
  // Union. Both sides may be in either mode.
  void merge(const ContentMissSet& other);

  std::size_t size() const { return hashed_ ? hashes_.size() : exact_.size(); }
  bool hashed() const { return hashed_; }

 private:
  void switch_to_hashes();

  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept;
  };

  std::size_t hash_threshold_;
  bool hashed_ = false;
  std::unordered_set<std::string, StringHash, std::equal_to<>> exact_;
  std::unordered_set<std::uint64_t> hashes_;
};

ContentMissSet build_miss_set(std::span<const LogRecord> records, const PatternConfig& cfg = {});

PackagingClass classify_packaging(std::string_view content_path, const ContentMissSet& miss_set,
                                  const PatternConfig& cfg = {});

struct ClassifiedRecord {
  LogRecord record;
  ServiceClass service = ServiceClass::Website;
  PackagingClass packaging = PackagingClass::NonPackaged;

  friend bool operator==(const ClassifiedRecord&, const ClassifiedRecord&) = default;
};

// Record counts keyed by (service, packaging).
class ClassCounts {
 public:
  void add(ServiceClass s, PackagingClass p, std::uint64_t n = 1) { counts_[index(s, p)] += n; }
  std::uint64_t get(ServiceClass s, PackagingClass p) const { return counts_[index(s, p)]; }
  std::uint64_t total() const;
  ClassCounts& operator+=(const ClassCounts& o);
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;

  // "service,packaging,count" with one row per non-empty class.
  std::string to_csv() const;

 private:
  static std::size_t index(ServiceClass s, PackagingClass p) {
    return static_cast<std::size_t>(s) * 2 + static_cast<std::size_t>(p);
  }
  std::array<std::uint64_t, 6> counts_{};
};

struct ClassifyResult {
  std::vector<ClassifiedRecord> records;
  ClassCounts counts;
};

ClassifyResult classify_stream(std::span<const LogRecord> records, const PatternConfig& cfg = {});
ClassifyResult classify_stream(std::vector<LogRecord>&& records, const PatternConfig& cfg = {});

}  // namespace cdnlog
