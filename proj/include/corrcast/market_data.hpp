#pragma once

// Loading, cleaning and subsampling of the daily adjusted-close price panel.
// Missing prices are held as NaN in the matrix; zero is a legal-looking price
// and must never double as a sentinel.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "corrcast/csv.hpp"
#include "corrcast/rng.hpp"

namespace corrcast::data {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/**
 * Date-indexed adjusted-close matrix over a ticker universe.
 * Dates are ISO-8601 strings and strictly increasing; prices are positive
 * where present.
 */
struct PriceTable {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Eigen::MatrixXd prices;  // rows = dates, cols = tickers

  std::size_t days() const { return dates.size(); }
  std::size_t size() const { return tickers.size(); }

  int ticker_index(const std::string& ticker) const {
    for (std::size_t j = 0; j < tickers.size(); ++j)
      if (tickers[j] == ticker) return static_cast<int>(j);
    return -1;
  }

  bool has_missing() const {
    for (Eigen::Index j = 0; j < prices.cols(); ++j)
      for (Eigen::Index i = 0; i < prices.rows(); ++i)
        if (is_missing(prices(i, j))) return true;
    return false;
  }
};

struct TickerStats {
  std::string ticker;
  double missing_ratio = 0.0;
  int longest_gap = 0;
  bool excluded = false;
  std::string reason;
};

struct AssetFilterReport {
  std::vector<TickerStats> tickers;
  std::vector<std::string> excluded;
};

/**
 * Parse a comma-delimited price table: header `date,<T1>,<T2>,...`, one row
 * per trading day, empty cell = missing. Rows are sorted by date; duplicate
 * dates, non-positive prices and unparseable cells are rejected.
 */
inline PriceTable load_prices(const std::string& path, char delim = ',') {
  const auto rows = csv::read_rows(path, delim);
  if (rows.empty()) throw std::runtime_error("empty price file: " + path);
  const auto& header = rows.front();
  if (header.size() < 2 || header[0] != "date")
    throw std::runtime_error("price file header must be 'date,<TICKER>,...': " + path);

  PriceTable table;
  table.tickers.assign(header.begin() + 1, header.end());

  struct Row {
    std::string date;
    std::vector<double> values;
  };
  std::vector<Row> parsed;
  parsed.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(r + 1) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    Row row;
    row.date = cells[0];
    row.values.resize(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c].empty()) {
        row.values[c - 1] = kMissing;
        continue;
      }
      const double v = csv::to_double(cells[c], table.tickers[c - 1] + "@" + row.date);
      if (v <= 0.0)
        throw std::runtime_error("non-positive price for " + table.tickers[c - 1] + " at " + row.date);
      row.values[c - 1] = v;
    }
    parsed.push_back(std::move(row));
  }
  if (parsed.empty()) throw std::runtime_error("price file has no data rows: " + path);

  std::sort(parsed.begin(), parsed.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < parsed.size(); ++i)
    if (parsed[i].date == parsed[i - 1].date)
      throw std::runtime_error("duplicate date: " + parsed[i].date);

  table.dates.reserve(parsed.size());
  table.prices.resize(static_cast<Eigen::Index>(parsed.size()),
                      static_cast<Eigen::Index>(table.tickers.size()));
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    table.dates.push_back(parsed[i].date);
    for (std::size_t j = 0; j < table.tickers.size(); ++j)
      table.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parsed[i].values[j];
  }

  for (std::size_t j = 0; j < table.tickers.size(); ++j) {
    bool any = false;
    for (std::size_t i = 0; i < parsed.size() && !any; ++i)
      any = !is_missing(table.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    if (!any) throw std::runtime_error("ticker " + table.tickers[j] + " has no observations");
  }
  return table;
}

/// Keep the listed tickers, preserving the table's original column order.
inline PriceTable select_tickers(const PriceTable& table, const std::vector<std::string>& keep) {
  const std::set<std::string> wanted(keep.begin(), keep.end());
  PriceTable out;
  out.dates = table.dates;
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < table.tickers.size(); ++j) {
    if (wanted.count(table.tickers[j])) {
      out.tickers.push_back(table.tickers[j]);
      cols.push_back(static_cast<Eigen::Index>(j));
    }
  }
  if (out.tickers.size() != wanted.size())
    throw std::runtime_error("select_tickers: some requested tickers are absent from the table");
  out.prices.resize(table.prices.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.prices.col(static_cast<Eigen::Index>(j)) = table.prices.col(cols[j]);
  return out;
}

/**
 * Drop tickers whose missing ratio exceeds max_ratio or whose longest run of
 * consecutive missing days exceeds max_gap. The report covers every ticker.
 */
inline std::pair<PriceTable, AssetFilterReport> filter_assets(const PriceTable& table,
                                                              double max_ratio, int max_gap) {
  if (max_ratio < 0.0 || max_ratio > 1.0)
    throw std::invalid_argument("filter_assets: max_ratio must be in [0,1]");
  if (max_gap < 1) throw std::invalid_argument("filter_assets: max_gap must be >= 1");

  AssetFilterReport report;
  std::vector<std::string> kept;
  const auto n = static_cast<Eigen::Index>(table.days());
  for (std::size_t j = 0; j < table.tickers.size(); ++j) {
    TickerStats stats;
    stats.ticker = table.tickers[j];
    int missing = 0, run = 0, longest = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (is_missing(table.prices(i, static_cast<Eigen::Index>(j)))) {
        ++missing;
        longest = std::max(longest, ++run);
      } else {
        run = 0;
      }
    }
    stats.missing_ratio = n > 0 ? static_cast<double>(missing) / static_cast<double>(n) : 0.0;
    stats.longest_gap = longest;
    if (stats.missing_ratio > max_ratio) {
      stats.excluded = true;
      stats.reason = "missing ratio " + csv::format_double(stats.missing_ratio) + " > " +
                     csv::format_double(max_ratio);
    } else if (stats.longest_gap > max_gap) {
      stats.excluded = true;
      stats.reason = "longest gap " + std::to_string(stats.longest_gap) + " > " + std::to_string(max_gap);
    }
    if (stats.excluded)
      report.excluded.push_back(stats.ticker);
    else
      kept.push_back(stats.ticker);
    report.tickers.push_back(std::move(stats));
  }
  if (kept.empty()) throw std::runtime_error("empty universe: all tickers excluded");
  return {select_tickers(table, kept), std::move(report)};
}

/**
 * Replace each missing price at day t with the value at t-1 (cascading).
 * A ticker whose first observation is missing cannot be filled.
 */
inline PriceTable forward_fill(const PriceTable& table) {
  PriceTable out = table;
  for (Eigen::Index j = 0; j < out.prices.cols(); ++j) {
    if (out.prices.rows() == 0) continue;
    if (is_missing(out.prices(0, j)))
      throw std::runtime_error("no fill source: ticker " + out.tickers[static_cast<std::size_t>(j)] +
                               " starts with a missing price");
    for (Eigen::Index i = 1; i < out.prices.rows(); ++i)
      if (is_missing(out.prices(i, j))) out.prices(i, j) = out.prices(i - 1, j);
  }
  return out;
}

/// n distinct tickers, uniform without replacement, deterministic per seed.
inline std::vector<std::string> sample_universe(const PriceTable& table, std::size_t n,
                                                std::uint64_t seed) {
  if (n > table.tickers.size())
    throw std::invalid_argument("sample_universe: n exceeds the universe size");
  Rng rng(seed);
  const auto idx = rng.sample_indices(table.tickers.size(), n);
  std::vector<std::string> out;
  out.reserve(n);
  for (const auto i : idx) out.push_back(table.tickers[i]);
  return out;
}

inline nlohmann::json filter_report_json(const AssetFilterReport& report) {
  nlohmann::json j;
  j["excluded"] = report.excluded;
  auto& arr = j["tickers"] = nlohmann::json::array();
  for (const auto& t : report.tickers) {
    arr.push_back({{"ticker", t.ticker},
                   {"missing_ratio", t.missing_ratio},
                   {"longest_gap", t.longest_gap},
                   {"excluded", t.excluded},
                   {"reason", t.reason}});
  }
  return j;
}

}  // namespace corrcast::data
