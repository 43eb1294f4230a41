#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace spare {

// Hex-encoded SHA-256. Backs cache keys, prompt digests, and manifest file
// digests.
std::string sha256_hex(std::string_view bytes);

// SHA-256 of a file's contents. Throws IoFailure if unreadable.
std::string file_digest(const std::filesystem::path& path);

}  // namespace spare
