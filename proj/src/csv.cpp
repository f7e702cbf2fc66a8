#include "fertsae/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fertsae/errors.hpp"

namespace fertsae::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

Table Table::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path);
}

Table Table::from_string(const std::string& text, const std::string& origin) {
  Table t;
  t.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCode::schema, origin + ": empty file, header required");
  t.header_ = split_line(line);
  std::size_t width = t.header_.size();
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (fields.size() != width)
      fail(ErrorCode::schema, origin + " row " +
                                  std::to_string(t.rows_.size() + 2) + ": expected " +
                                  std::to_string(width) + " fields, got " +
                                  std::to_string(fields.size()));
    t.rows_.push_back(std::move(fields));
  }
  return t;
}

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<int>(i);
  fail(ErrorCode::schema, origin_ + ": missing required column '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

const std::string& Table::cell(std::size_t row, int col) const {
  return rows_[row][static_cast<std::size_t>(col)];
}

double Table::as_double(std::size_t row, int col) const {
  const std::string& s = cell(row, col);
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::schema, origin_ + " row " + std::to_string(file_row(row)) +
                                ": '" + s + "' is not a number");
  return v;
}

std::int64_t Table::as_int(std::size_t row, int col) const {
  const std::string& s = cell(row, col);
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::schema, origin_ + " row " + std::to_string(file_row(row)) +
                                ": '" + s + "' is not an integer");
  return static_cast<std::int64_t>(v);
}

Writer::Writer(const std::string& path) : path_(path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(ErrorCode::io, "cannot open for writing: " + path);
  file_ = f;
}

Writer::~Writer() {
  if (file_) std::fclose(static_cast<FILE*>(file_));
}

void Writer::row(const std::vector<std::string>& fields) {
  FILE* f = static_cast<FILE*>(file_);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) std::fputc(',', f);
    std::fwrite(fields[i].data(), 1, fields[i].size(), f);
  }
  std::fputc('\n', f);
}

void Writer::close() {
  if (file_) {
    std::fclose(static_cast<FILE*>(file_));
    file_ = nullptr;
  }
}

std::string Writer::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Writer::num(std::int64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
  return buf;
}

std::string Writer::num(int v) { return std::to_string(v); }

}  // namespace fertsae::csv
