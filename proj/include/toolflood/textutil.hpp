#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace toolflood {

// Lowercased tokens, split on ASCII non-alphanumerics. Bytes >= 0x80 are
// kept inside tokens so UTF-8 text does not shatter into single bytes.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Shortest round-trip decimal form (std::to_chars). Used everywhere a float
// lands in a report so re-runs are byte-identical.
std::string format_double(double value);

std::string sha256_hex(std::string_view data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace toolflood
