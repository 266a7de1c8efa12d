#pragma once

// Minimal CSV table handling and grouped mean / standard-error summaries.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbon {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("missing column: " + name);
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Plain comma-separated values without quoting; every row must match the
/// header width.
inline CsvTable read_csv(std::istream& in, const std::string& source = "<csv>") {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(source + ": empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw SchemaError(source + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

struct SummaryRow {
  std::vector<std::string> group;  // values of the grouping columns
  std::string metric;
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(trials); 0 when trials == 1
  std::size_t trials = 0;
};

/// Mean and standard error of `values`.
inline SummaryRow summarize_values(const std::vector<double>& values) {
  if (values.empty()) throw SchemaError("summarize: no values");
  SummaryRow r;
  r.trials = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  r.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return r;
}

/// Groups rows of all tables by `group_cols` (values kept verbatim) and
/// summarizes `metric_cols`, or every other column when that list is empty.
/// Tables must share one header.
inline std::vector<SummaryRow> summarize(const std::vector<CsvTable>& tables,
                                         const std::vector<std::string>& group_cols,
                                         const std::vector<std::string>& metric_cols = {}) {
  if (tables.empty()) throw SchemaError("summarize: no input tables");
  const auto& header = tables.front().header;
  for (const auto& t : tables)
    if (t.header != header) throw SchemaError("summarize: inputs have different headers");
  std::vector<std::size_t> gidx;
  for (const auto& g : group_cols) gidx.push_back(tables.front().column(g));
  std::vector<std::size_t> midx;
  if (metric_cols.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (std::find(gidx.begin(), gidx.end(), c) == gidx.end()) midx.push_back(c);
  } else {
    for (const auto& m : metric_cols) midx.push_back(tables.front().column(m));
  }

  // keep first-seen group order
  std::vector<std::vector<std::string>> order;
  std::map<std::vector<std::string>, std::vector<std::vector<double>>> values;
  for (const auto& t : tables) {
    for (const auto& row : t.rows) {
      std::vector<std::string> key;
      for (auto i : gidx) key.push_back(row[i]);
      auto [it, fresh] = values.try_emplace(key, midx.size());
      if (fresh) order.push_back(key);
      for (std::size_t m = 0; m < midx.size(); ++m) {
        const std::string& cell = row[midx[m]];
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(cell, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != cell.size())
          throw SchemaError("summarize: non-numeric value '" + cell + "' in column " +
                            header[midx[m]]);
        it->second[m].push_back(v);
      }
    }
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& cols = values.at(key);
    for (std::size_t m = 0; m < midx.size(); ++m) {
      SummaryRow r = summarize_values(cols[m]);
      r.group = key;
      r.metric = header[midx[m]];
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<std::string>& group_cols,
                              const std::vector<SummaryRow>& rows) {
  for (const auto& g : group_cols) os << g << ',';
  os << "metric,mean,se,trials\n";
  char buf[64];
  for (const auto& r : rows) {
    for (const auto& g : r.group) os << g << ',';
    os << r.metric << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.mean, r.se);
    os << buf << ',' << r.trials << '\n';
  }
}

}  // namespace tbon
