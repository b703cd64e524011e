#pragma once

#include <string>
#include <vector>

namespace toolflood {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRemoteError = 3;
inline constexpr int kExitCertificateError = 4;

/// Entry point behind the binary; takes argv-style arguments without the
/// program name. Never calls exit().
int run_cli(const std::vector<std::string>& args);

}  // namespace toolflood
