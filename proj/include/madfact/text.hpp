#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace madfact::text {

std::string trim(std::string_view s);

/// Collapses every run of whitespace to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Full Unicode case folding of UTF-8 input.
std::string casefold(std::string_view utf8);

/// casefold + collapse_whitespace. Used for query dedup and claim matching.
std::string normalize(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Replaces every "{name}" in tmpl with the mapped value; unknown slots are left as-is.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& slots);

/// Filesystem-safe slug (alnum, '-', '_', '.'); other bytes become '_'.
std::string safe_filename(std::string_view s);

}  // namespace madfact::text
