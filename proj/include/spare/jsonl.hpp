#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spare {

// Artifact serialization uses ordered_json so every file keeps the
// documented key order and reruns are byte-identical.
using Json = nlohmann::ordered_json;

// One parsed object per non-blank line. Throws IoFailure on unreadable
// files and ParseFailure on malformed lines (with line number).
std::vector<Json> read_jsonl(const std::filesystem::path& path);

// Serialize one object per line. All artifact writes go through the atomic
// variants: temp file in the same directory + rename.
void write_jsonl_atomic(const std::filesystem::path& path,
                        const std::vector<Json>& rows);
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text);
void write_json_atomic(const std::filesystem::path& path, const Json& value);

std::string read_text(const std::filesystem::path& path);

}  // namespace spare
