#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace kb2text {

// Write-to-temp + atomic rename; no partial files on failure.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

// Calls fn(line, line_number) for every non-empty line. 1-based numbering.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const std::string&, long)>& fn);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace kb2text
