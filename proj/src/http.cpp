#include "toolflood/http.hpp"

#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "toolflood/errors.hpp"
#include "toolflood/log.hpp"

namespace toolflood {

namespace {

// Split "http://host:port/some/path" into origin and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("invalid URL (missing scheme): " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

nlohmann::json http_post_json(const HttpRequestConfig& config,
                              const nlohmann::json& body) {
  const auto [origin, path] = split_url(config.url);
  const std::string payload = body.dump();

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
      log_warn("retrying POST " + config.url + " (attempt " +
               std::to_string(attempt + 1) + "): " + last_error);
    }
    httplib::Client client(origin);
    client.set_connection_timeout(config.timeout_seconds, 0);
    client.set_read_timeout(config.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config.bearer_token.empty()) {
      headers.emplace("Authorization", "Bearer " + config.bearer_token);
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable_status(res->status)) continue;
      throw RemoteError("POST " + config.url + " failed: " + last_error);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      last_error = std::string("bad JSON reply: ") + e.what();
      continue;
    }
  }
  throw RemoteError("POST " + config.url + " failed after " +
                    std::to_string(config.max_retries + 1) +
                    " attempts: " + last_error);
}

std::string env_or_empty(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  return value ? std::string(value) : std::string();
}

}  // namespace toolflood
