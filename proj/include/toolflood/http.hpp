#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

namespace toolflood {

struct HttpRequestConfig {
  std::string url;           // full URL, e.g. http://host:8080/v1/embeddings
  std::string bearer_token;  // empty = no Authorization header
  std::size_t max_retries = 3;
  int timeout_seconds = 60;
};

/// POST a JSON body; parse the JSON reply. Retries transport errors and
/// 5xx/429 responses with linear backoff, then throws RemoteError.
nlohmann::json http_post_json(const HttpRequestConfig& config,
                              const nlohmann::json& body);

/// Value of the named environment variable, or empty string.
std::string env_or_empty(const std::string& name);

}  // namespace toolflood
