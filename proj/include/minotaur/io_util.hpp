#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace minotaur {

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a 64-bit content hash, prefixed "fnv1a64:".
std::string content_hash(const std::string& bytes);
std::string file_hash(const std::string& path);

/// One TSV row; fields must not contain tabs or newlines.
void write_tsv(const std::string& path,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace minotaur
