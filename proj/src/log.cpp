#include "toolflood/log.hpp"

#include <mutex>

namespace toolflood {

LogLevel& log_threshold() {
  static LogLevel level = LogLevel::kInfo;
  return level;
}

void log_message(LogLevel level, const std::string& message) {
  if (level < log_threshold()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  const char* tag = level == LogLevel::kWarn ? "warn" : "info";
  std::fprintf(stderr, "[%s] %s\n", tag, message.c_str());
}

}  // namespace toolflood
