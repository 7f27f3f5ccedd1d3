#include "barfiq/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "barfiq/errors.hpp"

namespace barfiq::csv {

namespace {
void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}
std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }
}  // namespace

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Reader::Reader(std::istream& in, std::vector<std::string> expected_header) : in_(in), width_(expected_header.size()) {
  std::string header;
  if (!std::getline(in_, header)) throw DataError("csv: missing header");
  ++line_;
  strip_cr(header);
  if (split(header) != expected_header) {
    std::string want;
    for (std::size_t i = 0; i < expected_header.size(); ++i) want += (i ? "," : "") + expected_header[i];
    throw DataError("csv: header '" + header + "' does not match '" + want + "'");
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string row;
  while (std::getline(in_, row)) {
    ++line_;
    strip_cr(row);
    if (row.empty()) continue;
    fields = split(row);
    if (fields.size() != width_) {
      throw DataError(at_line(line_) + "expected " + std::to_string(width_) + " fields, got " +
                      std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(at_line(line) + "not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(at_line(line) + "not an integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace barfiq::csv
