#include "spare/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "spare/errors.hpp"

namespace fs = std::filesystem;

namespace spare {

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot read " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseFailure(path.string() + ":" + std::to_string(lineno) + ": " +
                         e.what());
    }
  }
  return rows;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoFailure("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoFailure("rename " + tmp.string() + " -> " + path.string() +
                          ": " + ec.message());
}

void write_jsonl_atomic(const fs::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& row : rows) {
    text += row.dump();
    text += '\n';
  }
  write_text_atomic(path, text);
}

void write_json_atomic(const fs::path& path, const Json& value) {
  write_text_atomic(path, value.dump(2) + "\n");
}

}  // namespace spare
