#pragma once

// CSV ingestion: header row, d numeric feature columns, then the target.
// Features are standardized to mean 0 and population variance 1.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "tsr/core.hpp"
#include "tsr/error.hpp"

namespace tsr {

struct LoadedData {
  FullSample sample;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::vector<std::string> warnings;  // e.g. dropped constant columns
};

namespace detail {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

}  // namespace detail

/// Raw numeric table from CSV text. Rows are 1-based in error messages
/// (the header is row 1); columns are 1-based.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  long row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (detail::trim(line).empty() || detail::trim(line) == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (table.header.empty()) {
      for (auto& f : fields) table.header.emplace_back(detail::trim(f));
      detail::require(table.header.size() >= 2, ErrorCode::ParseError,
                      "header needs at least one feature and one target column");
      continue;
    }
    detail::require(fields.size() == table.header.size(), ErrorCode::ParseError,
                    "row " + std::to_string(row_no) + ": expected " +
                        std::to_string(table.header.size()) + " columns, got " +
                        std::to_string(fields.size()));
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      detail::require(detail::parse_double(fields[c], values[c]), ErrorCode::ParseError,
                      "row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                          ": non-numeric cell '" + fields[c] + "'");
    table.rows.push_back(std::move(values));
  }
  detail::require(!table.header.empty(), ErrorCode::ParseError, "empty CSV input");
  return table;
}

/// Standardizes features (population variance), drops constant feature
/// columns with a warning, scales the target and sets M = max |target|.
inline LoadedData normalize_table(const CsvTable& table, double target_scale) {
  detail::require(table.rows.size() >= 2, ErrorCode::InvalidSample, "need at least two data rows");
  detail::require(std::isfinite(target_scale) && target_scale != 0.0, ErrorCode::InvalidConfig,
                  "target scale must be finite and non-zero");
  const std::size_t n = table.rows.size();
  const std::size_t d = table.header.size() - 1;

  std::vector<std::string> warnings, names;
  std::vector<std::size_t> keep;
  std::vector<double> means, scales;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (const auto& r : table.rows) mean += r[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : table.rows) var += (r[c] - mean) * (r[c] - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) {
      warnings.push_back(std::string(to_string(ErrorCode::ZeroVarianceFeature)) + ": column " +
                         std::to_string(c + 1) + " ('" + table.header[c] + "') is constant; dropped");
      continue;
    }
    keep.push_back(c);
    names.push_back(table.header[c]);
    means.push_back(mean);
    scales.push_back(std::sqrt(var));
  }
  detail::require(!keep.empty(), ErrorCode::ZeroVarianceFeature, "every feature column is constant");

  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(keep.size()));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < keep.size(); ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          (table.rows[i][keep[k]] - means[k]) / scales[k];
    y(static_cast<Eigen::Index>(i)) = table.rows[i][d] * target_scale;
  }
  return LoadedData{FullSample::with_tight_bound(std::move(x), std::move(y)), std::move(names),
                    table.header[d], std::move(warnings)};
}

inline LoadedData load_and_normalize(std::istream& in, double target_scale = 1.0) {
  return normalize_table(read_csv(in), target_scale);
}

inline LoadedData load_and_normalize(const std::string& path, double target_scale = 1.0) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::IoError, "cannot open data file " + path);
  return load_and_normalize(in, target_scale);
}

/// Number of labeled points inside the ball of radius r around the origin
/// (the centroid of standardized data).
inline Index m_of_r(const FullSample& sample, const Partition& part, double r) {
  Index count = 0;
  for (Index i : part.train())
    if (sample.points().row(static_cast<Eigen::Index>(i)).norm() <= r) ++count;
  return count;
}

}  // namespace tsr
