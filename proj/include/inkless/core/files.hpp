#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace inkless {

std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
// Writes to a sibling temporary then renames over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// Regular files with the given extension, sorted by path.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::string& extension = ".png");

}  // namespace inkless
