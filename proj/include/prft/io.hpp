// CSV tables with shortest round-trip number formatting.
#pragma once

#include <string>
#include <vector>

namespace prft {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // NaN is written as an empty field

  int column(const std::string& name) const;  // -1 when absent
  void add_row(std::vector<double> row);
};

std::string format_number(double v);
std::string to_csv(const Table& table);
Table parse_csv(const std::string& text);

void write_csv(const std::string& path, const Table& table);
Table read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace prft
