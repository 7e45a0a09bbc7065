#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace platoon {

std::string read_text(const std::string& path);
// Creates parent directories as needed.
void write_text(const std::string& path, const std::string& content);
nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

// Fixed-precision rendering used for every CSV number so output is byte-stable.
std::string fmt(double v);

// Minimal CSV for the harness' own files: comma separated, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable parse_csv(const std::string& text);
std::string to_csv(const CsvTable& t);

// 64-bit FNV-1a, hex encoded.
std::string content_hash(const std::string& data);

}  // namespace platoon
