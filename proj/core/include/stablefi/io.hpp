#pragma once

#include <filesystem>
#include <string>

namespace stablefi {

/// Reads a whole file into a string. Throws IoError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes `content` via a sibling temp file followed by an atomic rename, so
/// interrupted runs never leave a torn artifact behind.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace stablefi
