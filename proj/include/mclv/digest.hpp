#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace mclv {

/// Git blob id: hex SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_digest(std::span<const unsigned char> content);
std::string git_blob_digest(const std::string& content);
std::string file_digest(const std::filesystem::path& path);

}  // namespace mclv
