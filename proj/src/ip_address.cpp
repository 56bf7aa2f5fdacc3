#include "cdnlog/ip_address.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <cstring>

#include "cdnlog/hash.hpp"

namespace cdnlog {

namespace {

std::optional<IpAddress> parse_v4(std::string_view text) {
  std::array<std::uint8_t, 4> octets{};
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    if (i > 0) {
      if (pos >= text.size() || text[pos] != '.') return std::nullopt;
      ++pos;
    }
    std::size_t start = pos;
    unsigned value = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      value = value * 10 + static_cast<unsigned>(text[pos] - '0');
      ++pos;
      if (pos - start > 3) return std::nullopt;
    }
    std::size_t len = pos - start;
    // Leading zeros are ambiguous (octal in some parsers); reject them.
    if (len == 0 || value > 255 || (len > 1 && text[start] == '0')) return std::nullopt;
    octets[i] = static_cast<std::uint8_t>(value);
  }
  if (pos != text.size()) return std::nullopt;
  std::uint32_t host = (std::uint32_t{octets[0]} << 24) | (std::uint32_t{octets[1]} << 16) |
                       (std::uint32_t{octets[2]} << 8) | std::uint32_t{octets[3]};
  return IpAddress::v4(host);
}

}  // namespace

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress ip;
  ip.family_ = Family::V4;
  ip.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
  ip.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
  ip.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
  ip.bytes_[3] = static_cast<std::uint8_t>(host_order);
  return ip;
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& bytes) {
  IpAddress ip;
  ip.family_ = Family::V6;
  ip.bytes_ = bytes;
  return ip;
}

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  if (text.empty() || text.size() > INET6_ADDRSTRLEN) return std::nullopt;
  if (text.find(':') == std::string_view::npos) return parse_v4(text);

  char buf[INET6_ADDRSTRLEN + 1];
  std::memcpy(buf, text.data(), text.size());
  buf[text.size()] = '\0';
  std::array<std::uint8_t, 16> bytes{};
  if (inet_pton(AF_INET6, buf, bytes.data()) != 1) return std::nullopt;
  return v6(bytes);
}

IpAddress IpAddress::masked(int prefix_len) const {
  IpAddress out = *this;
  int width = bit_width();
  for (int bit = prefix_len; bit < width; ++bit) {
    out.bytes_[bit / 8] &= static_cast<std::uint8_t>(~(0x80u >> (bit % 8)));
  }
  return out;
}

void IpAddress::append_to(std::string& out) const {
  char buf[INET6_ADDRSTRLEN];
  char* p = buf;
  if (is_v4()) {
    for (int i = 0; i < 4; ++i) {
      if (i > 0) *p++ = '.';
      p = std::to_chars(p, buf + sizeof(buf), bytes_[i]).ptr;
    }
  } else {
    inet_ntop(AF_INET6, bytes_.data(), buf, sizeof(buf));
    p = buf + std::strlen(buf);
  }
  out.append(buf, p);
}

std::string IpAddress::to_string() const {
  std::string out;
  append_to(out);
  return out;
}

std::size_t IpAddressHash::operator()(const IpAddress& ip) const noexcept {
  const auto& b = ip.bytes();
  std::uint64_t h = fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
  return static_cast<std::size_t>(h ^ static_cast<std::uint64_t>(ip.family()));
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  auto slash = text.find('/');
  auto ip = IpAddress::parse(text.substr(0, slash));
  if (!ip) return std::nullopt;
  int len = ip->bit_width();
  if (slash != std::string_view::npos) {
    auto digits = text.substr(slash + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
    if (len < 0 || len > ip->bit_width()) return std::nullopt;
  }
  return Cidr{ip->masked(len), len};
}

bool Cidr::contains(const IpAddress& ip) const {
  return ip.family() == network.family() && ip.masked(prefix_len) == network;
}

std::string Cidr::to_string() const {
  return network.to_string() + "/" + std::to_string(prefix_len);
}

}  // namespace cdnlog
