#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

namespace vcube {

// Lowercase hex SHA-256.
std::string sha256_hex(const void* data, size_t size);
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace vcube
