#pragma once

#include <stdexcept>
#include <string>

namespace toolflood {

// Bad or unresolvable configuration. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Remote endpoint failure that survived bounded retries. Exit code 3.
class RemoteError : public std::runtime_error {
 public:
  explicit RemoteError(const std::string& what) : std::runtime_error(what) {}
};

// A theory certificate or acceptance check failed. Exit code 4.
class CertificateError : public std::runtime_error {
 public:
  explicit CertificateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace toolflood
