#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "cdnlog/errors.hpp"
#include "cdnlog/geoip.hpp"

namespace cdnlog {

struct HttpJsonResolver::Impl {
  std::string origin;         // "http://host[:port]"
  std::string path_template;  // "/json/{ip}"
  std::unique_ptr<httplib::Client> client;
};

namespace {

std::string replace_ip(std::string_view tmpl, const std::string& ip) {
  std::string out(tmpl);
  for (auto pos = out.find("{ip}"); pos != std::string::npos; pos = out.find("{ip}", pos + ip.size())) {
    out.replace(pos, 4, ip);
  }
  return out;
}

ResolverError error(ResolverError::Kind kind, bool retryable, std::string msg) {
  return ResolverError{kind, retryable, std::move(msg)};
}

}  // namespace

HttpJsonResolver::HttpJsonResolver(HttpResolverConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  const std::string& url = cfg_.url_template;
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) throw ConfigError("geo.http.url must start with http://: " + url);
  if (cfg_.requests_per_minute <= 0) throw ConfigError("geo.http.requests_per_minute must be positive");
  if (cfg_.url_template.find("{ip}") == std::string::npos) throw ConfigError("geo.http.url must contain {ip}");
  auto slash = url.find('/', kScheme.size());
  impl_->origin = url.substr(0, slash);
  impl_->path_template = slash == std::string::npos ? "/" : url.substr(slash);
  if (impl_->origin.find("{ip}") != std::string::npos) throw ConfigError("geo.http.url: {ip} must be in the path");
  impl_->client = std::make_unique<httplib::Client>(impl_->origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  impl_->client->set_connection_timeout(secs.count(), usecs.count());
  impl_->client->set_read_timeout(secs.count(), usecs.count());
  impl_->client->set_write_timeout(secs.count(), usecs.count());
}

HttpJsonResolver::~HttpJsonResolver() = default;

ResolveResult HttpJsonResolver::resolve(const IpAddress& ip) {
  std::lock_guard lock(mu_);
  auto now = std::chrono::steady_clock::now();
  if (now < next_allowed_) std::this_thread::sleep_until(next_allowed_);
  auto interval = std::chrono::duration<double>(60.0 / cfg_.requests_per_minute);
  next_allowed_ = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval);

  std::string path = replace_ip(impl_->path_template, ip.to_string());
  auto res = impl_->client->Get(path);
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      return error(ResolverError::Kind::Timeout, true, "timeout querying " + path);
    }
    return error(ResolverError::Kind::Network, true, "request failed: " + httplib::to_string(err));
  }
  if (res->status == 429 || res->status >= 500) {
    return error(ResolverError::Kind::HttpStatus, true, "HTTP " + std::to_string(res->status));
  }
  if (res->status == 404) return error(ResolverError::Kind::NotFound, false, "HTTP 404");
  if (res->status != 200) return error(ResolverError::Kind::HttpStatus, false, "HTTP " + std::to_string(res->status));

  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    return error(ResolverError::Kind::BadResponse, false, "response is not a JSON object");
  }
  if (!cfg_.status_field.empty() && body.contains(cfg_.status_field) && body[cfg_.status_field].is_string() &&
      body[cfg_.status_field].get<std::string>() == cfg_.fail_value) {
    return error(ResolverError::Kind::NotFound, false, "provider reported failure for " + ip.to_string());
  }
  auto get = [&](const std::string& key) -> std::string {
    if (!body.contains(key) || !body[key].is_string()) return {};
    return body[key].get<std::string>();
  };
  return GeoInfo{get(cfg_.isp_field), get(cfg_.province_field), get(cfg_.country_field)};
}

}  // namespace cdnlog
