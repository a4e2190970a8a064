#pragma once

// Shared JSON conversions for file formats and wire payloads.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reason_iad/embedding.hpp"
#include "reason_iad/error.hpp"

namespace reason_iad::detail {

using nlohmann::json;

inline std::vector<double> to_doubles(const json& j, const char* what) {
  if (!j.is_array()) throw Error(std::string(what) + ": expected a number list");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(std::string(what) + ": expected a number list");
    out.push_back(x.get<double>());
  }
  return out;
}

inline EmbeddingVector to_embedding(const json& j, const char* what) {
  return EmbeddingVector(to_doubles(j, what));
}

inline json from_embedding(const EmbeddingVector& v) { return json(v.data()); }

inline std::string read_file(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::string out;
  char buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot write '" + path.string() + "'");
  const bool ok = std::fwrite(contents.data(), 1, contents.size(), f) == contents.size();
  if (std::fclose(f) != 0 || !ok) throw Error("short write to '" + path.string() + "'");
}

// Splits on '\n', dropping a trailing '\r' on each line.
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

inline bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

}  // namespace reason_iad::detail
