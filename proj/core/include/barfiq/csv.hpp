#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// Minimal comma-separated I/O for the pipeline's flat numeric tables.
namespace barfiq::csv {

class Reader {
 public:
  // Reads and validates the header line against `expected_header`.
  Reader(std::istream& in, std::vector<std::string> expected_header);

  // Next data row; false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t width_;
  std::size_t line_ = 0;
};

std::vector<std::string> split(std::string_view line);

// Shortest representation that round-trips to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, std::size_t line);
std::int64_t parse_int(std::string_view s, std::size_t line);

}  // namespace barfiq::csv
