#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vulnkg {

// ASCII-only case folding; multi-byte UTF-8 sequences pass through untouched.
std::string to_lower(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

// Splits on a single character, keeping empty fields.
std::vector<std::string> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// FNV-1a, used for artifact/config fingerprints in manifests and checkpoints.
std::uint64_t fnv1a64(std::string_view data);

// Reads a whole file; transparently inflates gzip (magic 1f 8b).
std::string read_file(const std::string& path, bool allow_gzip = true);

void write_file(const std::string& path, std::string_view content);

bool file_exists(const std::string& path);

// Fixed-precision decimal formatting (used by text checkpoints so they diff cleanly).
std::string format_fixed(double v, int decimals);

}  // namespace vulnkg
