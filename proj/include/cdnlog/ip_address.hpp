#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cdnlog {

// An IPv4 or IPv6 address stored in network byte order. IPv4 addresses use
// the first four bytes; the remaining bytes are zero.
class IpAddress {
 public:
  enum class Family : std::uint8_t { V4, V6 };

  IpAddress() = default;

  static std::optional<IpAddress> parse(std::string_view text);
  static IpAddress v4(std::uint32_t host_order);
  static IpAddress v6(const std::array<std::uint8_t, 16>& bytes);

  Family family() const { return family_; }
  bool is_v4() const { return family_ == Family::V4; }
  int bit_width() const { return is_v4() ? 32 : 128; }
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }

  // Copy of this address with every bit past `prefix_len` cleared.
  IpAddress masked(int prefix_len) const;

  // Canonical text: dotted quad, or RFC 5952 form for IPv6.
  std::string to_string() const;
  void append_to(std::string& out) const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;

 private:
  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

struct IpAddressHash {
  std::size_t operator()(const IpAddress& ip) const noexcept;
};

// "a.b.c.d/n" or "x::y/n".
struct Cidr {
  IpAddress network;
  int prefix_len = 0;

  static std::optional<Cidr> parse(std::string_view text);
  bool contains(const IpAddress& ip) const;
  std::string to_string() const;
};

}  // namespace cdnlog
