#pragma once

// File helpers: SHA-256 digests, whole-file reads and atomic writes.

#include <filesystem>
#include <string>
#include <string_view>

namespace mixq::io {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& p);

// Throws DataError if the file cannot be read.
std::string read_file(const std::filesystem::path& p);

// Writes to a sibling temporary file, then renames over the target, so
// readers never see a partial file. Creates parent directories.
void write_atomic(const std::filesystem::path& p, std::string_view data);

}  // namespace mixq::io
