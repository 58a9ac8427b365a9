#include "csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nft/signals.hpp"

namespace nft::csv {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::vector<double>> read(const std::filesystem::path& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("csv: missing header in " + path.string());
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header != columns) throw Error("csv: unexpected header in " + path.string());
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error("csv: bad number '" + cell + "' on line " + std::to_string(line_no));
      }
    }
    if (row.size() != columns.size()) throw Error("csv: wrong column count on line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nft::csv
