#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace coldbench {

/// Reads a whole file. Throws DataError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Calls fn(line, line_number) for every line; ".gz" files are decompressed
/// transparently. Trailing '\r' is stripped. Line numbers start at 1.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace coldbench
