#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dseval {

/// Fresh directory under the system temp dir, e.g. /tmp/dseval-run-XXXXXX.
std::filesystem::path make_temp_dir(const std::string& prefix);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically through a sibling temp file.
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

/// UTC time as 2024-01-31T12:00:00Z.
std::string utc_timestamp();

std::string trim(std::string_view s);
/// Collapses every whitespace run to one space and trims.
std::string normalize_whitespace(std::string_view s);
/// Drops all whitespace.
std::string strip_whitespace(std::string_view s);

}  // namespace dseval
