#ifndef SVYFOSR_CSV_HPP
#define SVYFOSR_CSV_HPP

#include <string>
#include <vector>

namespace svyfosr::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column, -1 if absent.
  int find(const std::string& name) const;
  // Index of a named column, SchemaError if absent.
  std::size_t require(const std::string& name) const;
};

Table read_file(const std::string& path);

void write_file(const std::string& path, const Table& table);

// Full-precision formatting so numeric round trips are bit exact.
std::string format_double(double x);

}  // namespace svyfosr::csv

#endif
