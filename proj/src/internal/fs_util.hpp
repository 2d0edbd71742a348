#pragma once

#include <filesystem>
#include <string>

namespace madfact::detail {

/// Writes via a sibling temp file and rename; raises IO on failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Whole file as bytes; raises FileNotFound when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Appends a newline when the file exists, is non-empty and does not end in one.
void terminate_last_line(const std::filesystem::path& path);

}  // namespace madfact::detail
