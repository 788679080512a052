#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cpod::csv {

// Shortest text form that parses back to the identical double (17 significant
// digits round-trip binary64 exactly).
std::string fmt(double v);

double parse_double(const std::string& s);
long long parse_int(const std::string& s);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  ~Writer();

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((put(cell_text(cells), first), first = false), ...);
    out_ << '\n';
  }

  // Row with a runtime-determined cell count.
  void row_vec(const std::vector<std::string>& cells);

 private:
  static std::string cell_text(const std::string& s) { return s; }
  static std::string cell_text(const char* s) { return s; }
  static std::string cell_text(double v) { return fmt(v); }
  static std::string cell_text(long long v) { return std::to_string(v); }
  static std::string cell_text(unsigned long long v) { return std::to_string(v); }
  static std::string cell_text(int v) { return std::to_string(v); }
  static std::string cell_text(long v) { return std::to_string(v); }

  void put(const std::string& cell, bool first);

  std::ofstream out_;
  std::filesystem::path path_;
};

// Whole-file read; each row is the comma-split list of cells. The header row
// is returned like any other.
std::vector<std::vector<std::string>> read_table(
    const std::filesystem::path& path);

}  // namespace cpod::csv
