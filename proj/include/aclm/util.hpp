#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace aclm {

std::vector<std::string> split(std::string_view text, char separator);
std::string join(const std::vector<std::string>& parts, std::string_view separator);

/// ASCII-lowercased copy; non-ASCII bytes pass through unchanged.
std::string fold_case(std::string_view text);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);  // throws ArgumentError on bad input

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Hex FNV-1a digest of a file's contents, "fnv1a64:xxxxxxxxxxxxxxxx".
std::string file_digest(const std::filesystem::path& path);

}  // namespace aclm
