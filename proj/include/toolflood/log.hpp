#pragma once

#include <cstdio>
#include <string>

namespace toolflood {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kSilent = 3 };

LogLevel& log_threshold();

void log_message(LogLevel level, const std::string& message);

inline void log_info(const std::string& message) {
  log_message(LogLevel::kInfo, message);
}
inline void log_warn(const std::string& message) {
  log_message(LogLevel::kWarn, message);
}

}  // namespace toolflood
