#ifndef GVCPLM_CSV_HPP
#define GVCPLM_CSV_HPP

#include <Eigen/Dense>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gvcplm/dataset.hpp"
#include "gvcplm/errors.hpp"

namespace gvcplm::csv {

struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_of_row;  // 1-based source line where each row starts

  long column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<long>(j);
    return -1;
  }
};

/// RFC 4180 reader: comma separated, double-quoted fields with "" escapes,
/// CRLF or LF line ends. The first record is the header.
inline Document parse(std::istream& in) {
  Document doc;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false, any = false;
  long line = 1, record_line = 1;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (doc.header.empty() && doc.rows.empty()) doc.header = record;
      else {
        doc.rows.push_back(record);
        doc.line_of_row.push_back(record_line);
      }
    }
    record.clear();
    any = false;
  };
  char c;
  while (in.get(c)) {
    if (!any) {
      record_line = line;
      any = true;
    }
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      end_record();
      ++line;
    } else if (c == '\n') {
      end_record();
      ++line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field starting on line " + std::to_string(record_line));
  if (any) end_record();
  if (doc.header.empty()) throw DataError("CSV input has no header row");
  if (!doc.header.empty() && doc.header[0].rfind("\xEF\xBB\xBF", 0) == 0) doc.header[0].erase(0, 3);
  return doc;
}

inline Document read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse(in);
}

inline double parse_number(const std::string& s, long line, const std::string& column) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  if (b == e) throw DataError("missing value in column '" + column + "' on line " + std::to_string(line));
  double v = 0.0;
  const auto res = std::from_chars(s.data() + b, s.data() + e, v);
  if (res.ec != std::errc() || res.ptr != s.data() + e)
    throw DataError("non-numeric value '" + s + "' in column '" + column + "' on line " + std::to_string(line));
  return v;
}

/// Column roles for building a Dataset from a CSV document.
struct ColumnRoles {
  std::string y;
  std::string u;
  std::vector<std::string> x;
  std::vector<std::string> z;
  bool intercept = false;  // prepend a column of ones to X
};

inline Dataset to_dataset(const Document& doc, const ColumnRoles& roles) {
  auto require = [&](const std::string& name, const char* role) {
    const long j = doc.column(name);
    if (j < 0) throw DataError(std::string(role) + " column '" + name + "' not found in CSV header");
    return static_cast<std::size_t>(j);
  };
  if (roles.y.empty()) throw DataError("no response (y) column declared");
  if (roles.u.empty()) throw DataError("no index (u) column declared");
  const auto jy = require(roles.y, "response");
  const auto ju = require(roles.u, "index");
  std::vector<std::size_t> jx, jz;
  for (const auto& c : roles.x) jx.push_back(require(c, "x"));
  for (const auto& c : roles.z) jz.push_back(require(c, "z"));

  const auto n = static_cast<Eigen::Index>(doc.rows.size());
  const Eigen::Index q = static_cast<Eigen::Index>(jx.size()) + (roles.intercept ? 1 : 0);
  Dataset d;
  d.y.resize(n);
  d.u.resize(n);
  d.x.resize(n, q);
  d.z.resize(n, static_cast<Eigen::Index>(jz.size()));
  if (roles.intercept) d.x_names.push_back("intercept");
  for (const auto& c : roles.x) d.x_names.push_back(c);
  d.z_names = roles.z;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = doc.rows[static_cast<std::size_t>(i)];
    const long line = doc.line_of_row[static_cast<std::size_t>(i)];
    if (row.size() != doc.header.size())
      throw DataError("line " + std::to_string(line) + " has " + std::to_string(row.size()) + " fields, header has " +
                      std::to_string(doc.header.size()));
    d.y[i] = parse_number(row[jy], line, roles.y);
    d.u[i] = parse_number(row[ju], line, roles.u);
    Eigen::Index c = 0;
    if (roles.intercept) d.x(i, c++) = 1.0;
    for (std::size_t k = 0; k < jx.size(); ++k) d.x(i, c++) = parse_number(row[jx[k]], line, roles.x[k]);
    for (std::size_t k = 0; k < jz.size(); ++k)
      d.z(i, static_cast<Eigen::Index>(k)) = parse_number(row[jz[k]], line, roles.z[k]);
  }
  return d;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

inline void write_table(std::ostream& out, const std::vector<std::string>& columns,
                        const std::vector<std::vector<double>>& rows) {
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << quote(columns[j]);
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
    out << "\n";
  }
}

/// Writes y, u, the X columns (skipping a leading intercept column of ones
/// when `skip_intercept`) and the Z columns.
inline void write_dataset(std::ostream& out, const Dataset& d, bool skip_intercept = true) {
  std::vector<std::string> cols{"y", "u"};
  const Eigen::Index x0 = (skip_intercept && d.q() > 0 && (d.x.col(0).array() == 1.0).all()) ? 1 : 0;
  for (Eigen::Index j = x0; j < d.q(); ++j) cols.push_back(d.x_name(j));
  for (Eigen::Index j = 0; j < d.p(); ++j) cols.push_back(d.z_name(j));
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    std::vector<double> r{d.y[i], d.u[i]};
    for (Eigen::Index j = x0; j < d.q(); ++j) r.push_back(d.x(i, j));
    for (Eigen::Index j = 0; j < d.p(); ++j) r.push_back(d.z(i, j));
    rows.push_back(std::move(r));
  }
  write_table(out, cols, rows);
}

}  // namespace gvcplm::csv

#endif  // GVCPLM_CSV_HPP
