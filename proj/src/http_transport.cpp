#include "http_transport.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "dtcrs/error.hpp"

namespace dtcrs {

namespace {
std::atomic<std::size_t> g_network_requests{0};
}  // namespace

std::size_t network_request_count() { return g_network_requests.load(); }

namespace detail {

HttpTarget split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ArgumentError("URL '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers,
                         const RetryPolicy& policy) {
  const HttpTarget target = split_url(url);
  httplib::Client client(target.origin);
  const auto timeout = std::chrono::duration<double>(policy.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = policy.backoff_base_seconds * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    g_network_requests.fetch_add(1);
    auto res = client.Post(target.path, hdrs, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError(url + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw TransportError(url + ": response is not JSON: " + e.what());
    }
  }
  throw TransportError(url + ": giving up after " + std::to_string(policy.max_retries + 1) +
                       " attempts (" + last_error + ")");
}

}  // namespace detail
}  // namespace dtcrs
