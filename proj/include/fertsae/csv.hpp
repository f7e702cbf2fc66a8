#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fertsae::csv {

// Minimal CSV support for the project's numeric schemas: comma separation,
// required header row, no quoting, UTF-8 passthrough, tolerant of \r\n.
class Table {
 public:
  static Table read_file(const std::string& path);
  static Table from_string(const std::string& text, const std::string& origin);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t n_rows() const { return rows_.size(); }

  // Column index for `name`; throws schema error naming the file if absent.
  int column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  const std::string& cell(std::size_t row, int col) const;
  // 1-based data row number as found in the file (header is row 1).
  int file_row(std::size_t row) const { return static_cast<int>(row) + 2; }

  double as_double(std::size_t row, int col) const;
  std::int64_t as_int(std::size_t row, int col) const;

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

class Writer {
 public:
  explicit Writer(const std::string& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<std::string>& fields);
  void close();

  // Round-trip safe formatting (17 significant digits for doubles).
  static std::string num(double v);
  static std::string num(std::int64_t v);
  static std::string num(int v);

 private:
  std::string path_;
  void* file_;
};

}  // namespace fertsae::csv
