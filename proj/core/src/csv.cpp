#include "dimcollapse/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "dimcollapse/errors.hpp"

namespace dimcollapse::csv {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Writer::Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw IoError("cannot open for writing: " + path.string());
}

void Writer::header(const std::vector<std::string>& columns) {
  begin_row();
  for (const auto& c : columns) field(std::string_view(c));
  end_row();
}

void Writer::begin_row() { first_ = true; }

void Writer::field(double v) { field(std::string_view(format_real(v))); }

void Writer::field(long long v) { field(std::string_view(std::to_string(v))); }

void Writer::field(std::string_view v) {
  if (!first_) out_.put(',');
  out_.write(v.data(), static_cast<std::streamsize>(v.size()));
  first_ = false;
}

void Writer::end_row() {
  out_.put('\n');
  if (!out_) throw IoError("write failed: " + path_.string());
}

std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const char* begin = cell.c_str();
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(begin, &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (end == begin || (end && *end != '\0') || errno == ERANGE) {
        throw InvalidInputError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dimcollapse::csv
