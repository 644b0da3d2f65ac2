#pragma once

// Delimited-text helpers shared by all pipeline stages. Every artifact file
// starts with one '#' comment naming the producing stage and the config hash;
// readers skip leading '#' lines so the files stay consumable by external
// tools that honor comment rows.

#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace corrcast::csv {

/// Shortest text form that round-trips an IEEE double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char delim = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("unparseable cell '" + s + "' (" + context + ")");
  }
  if (pos != s.size()) throw std::runtime_error("unparseable cell '" + s + "' (" + context + ")");
  return v;
}

/// Rows of a delimited file, with '#' comment lines and blank lines skipped.
inline std::vector<std::vector<std::string>> read_rows(const std::string& path, char delim = ',') {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split(line, delim));
  }
  return rows;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open file for writing: " + path);
  }

  void comment(const std::string& text) { out_ << "# " << text << "\n"; }

  void row(std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<std::string>& fields) {
    row(std::span<const std::string>(fields));
  }

  void numeric_row(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace corrcast::csv
