#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "morss/common.hpp"
#include "morss/sampling.hpp"

namespace morss {

// ---------------------------------------------------------------------------
// RFC-4180 CSV: quoted fields, doubled quotes as escapes, CR/LF line ends,
// newlines allowed inside quoted fields. Errors carry 1-based positions.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> row_lines;  // source line where each data row starts
};

inline CsvTable parse_csv(std::istream& in, const std::string& name = "csv") {
  std::vector<std::vector<std::string>> records;
  std::vector<long> record_lines;
  std::vector<std::string> record;
  std::string field;
  long line = 1;
  long record_start = 1;
  bool quoted = false;
  bool after_close = false;  // a quoted field just ended; expect , or newline
  bool any_char = false;     // current record has content
  auto fail = [&](const std::string& msg) {
    throw DataError(name + ":" + std::to_string(line) + ": " + msg);
  };
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    after_close = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(record);
    record_lines.push_back(record_start);
    record.clear();
    any_char = false;
  };
  char ch;
  while (in.get(ch)) {
    if (!any_char && record.empty() && field.empty()) record_start = line;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
          after_close = true;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      any_char = true;
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty() || after_close)
          fail("unexpected quote inside unquoted field");
        quoted = true;
        any_char = true;
        break;
      case ',':
        end_field();
        any_char = true;
        break;
      case '\r':
        break;  // handled by the following '\n'
      case '\n':
        if (any_char || !record.empty() || !field.empty()) end_record();
        ++line;
        break;
      default:
        if (after_close) fail("unexpected character after closing quote");
        field += ch;
        any_char = true;
    }
  }
  if (quoted) fail("unterminated quoted field");
  if (any_char || !record.empty() || !field.empty()) end_record();
  if (records.empty()) throw DataError(name + ": file is empty");

  CsvTable table;
  table.header = records.front();
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size())
      throw DataError(name + ":" + std::to_string(record_lines[i]) + ": row has " +
                      std::to_string(records[i].size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[i]));
    table.row_lines.push_back(record_lines[i]);
  }
  return table;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// Population ingestion.
// ---------------------------------------------------------------------------

// Rule deriving a binary response from a continuous column.
struct BinaryThreshold {
  double value = 0.0;
  bool greater = true;  // y = 1 iff response > value (else: < value)
};

struct PopulationCsvMapping {
  std::string response;
  std::vector<std::string> predictors;
  std::vector<std::string> observers;  // may be empty for SRS-only use
  std::optional<BinaryThreshold> threshold;
};

namespace detail {

inline std::size_t column_index(const CsvTable& table, const std::string& name,
                                const std::string& where) {
  std::size_t found = table.header.size();
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == name) {
      if (found != table.header.size())
        throw DataError(where + ": column '" + name + "' appears twice");
      found = j;
    }
  }
  if (found == table.header.size())
    throw DataError(where + ": column '" + name + "' not found");
  return found;
}

inline double parse_cell(const CsvTable& table, std::size_t row,
                         std::size_t col, const std::string& where) {
  const std::string& cell = table.rows[row][col];
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  const auto res = std::from_chars(first, last, value);
  bool ok = res.ec == std::errc();
  for (const char* q = res.ptr; ok && q != last; ++q)
    if (*q != ' ' && *q != '\t') ok = false;
  if (!ok || !std::isfinite(value))
    throw DataError(where + ":" + std::to_string(table.row_lines[row]) +
                    ": column '" + table.header[col] +
                    "': cannot parse '" + cell + "' as a finite number");
  return value;
}

}  // namespace detail

inline Population load_population(const std::filesystem::path& path,
                                  const PopulationCsvMapping& mapping) {
  const CsvTable table = read_csv_file(path);
  const std::string where = path.filename().string();
  if (table.rows.empty()) throw DataError(where + ": no data rows");
  if (mapping.response.empty())
    throw DataError(where + ": no response column configured");
  const std::size_t y_col = detail::column_index(table, mapping.response, where);
  std::vector<std::size_t> x_cols, r_cols;
  for (const std::string& name : mapping.predictors)
    x_cols.push_back(detail::column_index(table, name, where));
  for (const std::string& name : mapping.observers)
    r_cols.push_back(detail::column_index(table, name, where));
  if (x_cols.empty()) throw DataError(where + ": no predictor columns configured");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Population pop;
  pop.predictors.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  pop.response.resize(n);
  pop.observers.resize(n, static_cast<Eigen::Index>(r_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    pop.response[i] = detail::parse_cell(table, row, y_col, where);
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      pop.predictors(i, static_cast<Eigen::Index>(j)) =
          detail::parse_cell(table, row, x_cols[j], where);
    for (std::size_t j = 0; j < r_cols.size(); ++j)
      pop.observers(i, static_cast<Eigen::Index>(j)) =
          detail::parse_cell(table, row, r_cols[j], where);
  }
  if (mapping.threshold) {
    const BinaryThreshold& rule = *mapping.threshold;
    for (Eigen::Index i = 0; i < n; ++i)
      pop.response[i] = (rule.greater ? pop.response[i] > rule.value
                                      : pop.response[i] < rule.value)
                            ? 1.0
                            : 0.0;
    pop.kind = ResponseKind::Binary;
  }
  return pop;
}

}  // namespace morss
