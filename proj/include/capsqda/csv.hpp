/**
 * @brief CSV ingestion: comma separated, header row required, '.' decimal.
 * Fields may be double-quoted ("" escapes a quote). One column holds the
 * class label; every other column must be numeric.
 */
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataset.hpp"

namespace capsqda {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
      was_quoted = false;
    } else {
      cur += ch;
    }
  }
  if (quoted) throw DataError("csv line " + std::to_string(lineno) + ": unterminated quote");
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& raw, std::size_t lineno, const std::string& col) {
  const std::string s = trim(raw);
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan")
    throw DataError("csv line " + std::to_string(lineno) + ", column '" + col + "': missing value");
  double v = 0.0;
  const char* first = s.data() + (s[0] == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("csv line " + std::to_string(lineno) + ", column '" + col + "': non-numeric value '" + s + "'");
  if (!std::isfinite(v))
    throw DataError("csv line " + std::to_string(lineno) + ", column '" + col + "': non-finite value");
  return v;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, lineno);
    if (!have_header) {
      for (auto& f : fields) f = detail::trim(f);
      t.header = std::move(fields);
      std::set<std::string> seen;
      for (const auto& h : t.header) {
        if (h.empty()) throw DataError("csv header: empty column name");
        if (!seen.insert(h).second) throw DataError("csv header: duplicate column '" + h + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("csv: empty input (a header row is required)");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return parse_csv(in);
}

struct LabeledData {
  Dataset data;
  std::string positive_label;
  std::string negative_label;
};

/// Rows become observations; `label_column` values map to +1 (positive) and
/// -1. Without an explicit positive label the lexicographically smaller of
/// the two values is positive.
inline LabeledData labeled_from_csv(const CsvTable& t, const std::string& label_column,
                                    const std::optional<std::string>& positive = std::nullopt) {
  const auto it = std::find(t.header.begin(), t.header.end(), label_column);
  if (it == t.header.end()) throw DataError("csv: label column '" + label_column + "' not found");
  const auto lc = static_cast<std::size_t>(it - t.header.begin());
  if (t.header.size() < 2) throw DataError("csv: no predictor columns");
  std::set<std::string> values;
  for (const auto& r : t.rows) {
    const std::string v = detail::trim(r[lc]);
    if (v.empty()) throw DataError("csv: missing label value");
    values.insert(v);
  }
  if (values.size() != 2)
    throw DataError("csv: label column '" + label_column + "' must hold exactly two distinct values, found " +
                    std::to_string(values.size()));
  LabeledData out;
  out.positive_label = *values.begin();
  out.negative_label = *std::next(values.begin());
  if (positive) {
    if (!values.count(*positive)) throw DataError("csv: positive label '" + *positive + "' does not occur");
    if (*positive != out.positive_label) std::swap(out.positive_label, out.negative_label);
  }
  const auto n = static_cast<Index>(t.rows.size());
  const auto p = static_cast<Index>(t.header.size() - 1);
  out.data.X.resize(n, p);
  out.data.y.resize(n);
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != lc) out.data.names.push_back(t.header[c]);
  for (Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    Index j = 0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == lc) continue;
      out.data.X(i, j++) = detail::parse_number(r[c], static_cast<std::size_t>(i) + 2, t.header[c]);
    }
    out.data.y[i] = detail::trim(r[lc]) == out.positive_label ? kPositive : kNegative;
  }
  return out;
}

struct FeatureData {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
};

/// All columns except `label_column` (if present) as predictors.
inline FeatureData features_from_csv(const CsvTable& t, const std::string& label_column) {
  FeatureData out;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c] != label_column) {
      cols.push_back(c);
      out.names.push_back(t.header[c]);
    }
  if (cols.empty()) throw DataError("csv: no predictor columns");
  out.X.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out.X(static_cast<Index>(i), static_cast<Index>(j)) =
          detail::parse_number(t.rows[i][cols[j]], i + 2, t.header[cols[j]]);
  return out;
}

/// Writes a labeled dataset with columns X1..Xp (or its names) and `label`.
inline std::string dataset_csv(const Dataset& d, const std::string& pos = "1", const std::string& neg = "-1",
                               const std::string& label_column = "label") {
  std::ostringstream os;
  for (Index j = 0; j < d.p(); ++j)
    os << (d.names.empty() ? "X" + std::to_string(j + 1) : d.names[static_cast<std::size_t>(j)]) << ",";
  os << label_column << "\n";
  char buf[40];
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 0; j < d.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.X(i, j));
      os << buf << ",";
    }
    os << (d.y[i] == kPositive ? pos : neg) << "\n";
  }
  return os.str();
}

}  // namespace capsqda
