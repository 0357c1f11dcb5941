#pragma once

#include <string>
#include <string_view>

namespace pkgwave {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

} // namespace pkgwave
