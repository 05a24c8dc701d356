#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dtcrs::detail {

struct HttpTarget {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

HttpTarget split_url(const std::string& url);

struct RetryPolicy {
  double timeout_seconds = 120.0;
  int max_retries = 3;
  double backoff_base_seconds = 0.5;
};

/// POSTs a JSON body, retrying connection failures, 429 and 5xx with
/// exponential backoff. Throws TransportError once retries are exhausted or
/// on any other non-2xx status.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers,
                         const RetryPolicy& policy);

}  // namespace dtcrs::detail
