#include "cpod/csv.hpp"

#include <charconv>
#include <cstdio>

#include "cpod/error.hpp"

namespace cpod::csv {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw Error("format", "bad numeric cell: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw Error("format", "bad integer cell: '" + s + "'");
  return v;
}

Writer::Writer(const std::filesystem::path& path) : out_(path), path_(path) {
  if (!out_) throw Error("io", "cannot open " + path.string() + " for writing");
}

Writer::~Writer() = default;

void Writer::put(const std::string& cell, bool first) {
  if (!first) out_ << ',';
  out_ << cell;
}

void Writer::row_vec(const std::vector<std::string>& cells) {
  bool first = true;
  for (const auto& cell : cells) {
    put(cell, first);
    first = false;
  }
  out_ << '\n';
}

std::vector<std::vector<std::string>> read_table(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace cpod::csv
