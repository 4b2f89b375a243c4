#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace raas {

// 17 significant digits: lossless double round-trip, byte-stable output.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    out_ << header << '\n';
  }

  void row(const std::vector<std::string>& cells) { out_ << join_csv(cells) << '\n'; }
  void raw_line(const std::string& line) { out_ << line << '\n'; }

  bool good() const { return static_cast<bool>(out_); }

 private:
  std::ofstream out_;
};

}  // namespace raas
