#pragma once

#include "tenkf/core.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tenkf::experiments {

/// 17 significant digits, '.' decimal separator.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
/// Short form for labels and file names.
inline std::string label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
inline std::string label(long v) { return std::to_string(v); }

inline std::string num(long v) { return std::to_string(v); }
inline std::string num(long long v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }
inline std::string num(const std::string& s) { return s; }
inline std::string num(const char* s) { return s; }

/// Comma-delimited table writer; fields must not contain commas.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    row_strings(header);
  }

  template <typename... T>
  void row(const T&... fields) {
    row_strings({num(fields)...});
  }

  void row_strings(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
    if (!out_) throw Error("write failed: " + path_.string());
  }

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace tenkf::experiments
