#pragma once

// Rolling-window correlation panel over all asset pairs, and the four
// overlapping walk-forward dataset slices cut from each 24-step series.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "corrcast/csv.hpp"
#include "corrcast/market_data.hpp"
#include "corrcast/parallel.hpp"

namespace corrcast::corr {

inline constexpr int kSeriesLen = 24;
inline constexpr int kSliceLen = 21;
inline constexpr std::array<const char*, 4> kSliceNames = {"train", "dev", "test1", "test2"};

/// One (asset pair, window offset) series of rolling correlation coefficients.
struct CorrSeries {
  std::string ticker_a;  // lexically first member of the pair by panel order
  std::string ticker_b;
  int offset = 1;  // 1-based start index of the first window
  std::vector<double> values;
};

/// Four overlapping 21-step views of a 24-step series (1-based index ranges
/// [1,21], [2,22], [3,23], [4,24]).
struct WalkForwardSlices {
  std::array<std::vector<double>, 4> slices;

  const std::vector<double>& train() const { return slices[0]; }
  const std::vector<double>& dev() const { return slices[1]; }
  const std::vector<double>& test1() const { return slices[2]; }
  const std::vector<double>& test2() const { return slices[3]; }
};

/// Sample Pearson correlation coefficient, clamped into [-1,1].
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least two observations");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw std::runtime_error("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/**
 * Correlations over windows [offset + k*stride, offset + k*stride + window - 1]
 * (1-based), emitted until the series end, or until max_steps windows when
 * max_steps > 0. Throws if not even one window fits.
 */
inline std::vector<double> rolling_correlation(std::span<const double> a, std::span<const double> b,
                                               int window, int stride, int offset,
                                               int max_steps = 0) {
  if (window < 2) throw std::invalid_argument("rolling_correlation: window must be >= 2");
  if (stride < 1) throw std::invalid_argument("rolling_correlation: stride must be >= 1");
  if (offset < 1) throw std::invalid_argument("rolling_correlation: offset must be >= 1");
  if (a.size() != b.size()) throw std::invalid_argument("rolling_correlation: length mismatch");
  const auto len = static_cast<long>(a.size());
  if (static_cast<long>(offset) + window - 1 > len)
    throw std::runtime_error("rolling_correlation: series shorter than offset + window - 1");
  std::vector<double> out;
  for (long start = offset - 1; start + window <= len; start += stride) {
    if (max_steps > 0 && static_cast<int>(out.size()) == max_steps) break;
    out.push_back(pearson(a.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(window)),
                          b.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(window))));
  }
  return out;
}

struct PanelConfig {
  int window = 100;
  int stride = 100;
  std::vector<int> offsets = {1, 21, 41, 61, 81};
  int series_len = kSeriesLen;
  bool on_returns = false;  // default correlates price levels
};

inline std::vector<double> simple_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw std::invalid_argument("simple_returns: need at least two prices");
  std::vector<double> r(prices.size() - 1);
  for (std::size_t t = 1; t < prices.size(); ++t) r[t - 1] = prices[t] / prices[t - 1] - 1.0;
  return r;
}

/**
 * One CorrSeries per unordered ticker pair per offset, each exactly
 * series_len steps (longer window runs are truncated, shorter ones rejected).
 * Output ordering is (pair index, offset), independent of thread count.
 */
inline std::vector<CorrSeries> build_corr_panel(const data::PriceTable& table,
                                                const PanelConfig& config, int threads = 1) {
  if (table.size() < 2) throw std::invalid_argument("build_corr_panel: need at least two tickers");
  if (config.offsets.empty()) throw std::invalid_argument("build_corr_panel: offsets must be nonempty");
  if (table.has_missing()) throw std::runtime_error("build_corr_panel: table has missing prices");

  std::vector<std::vector<double>> columns(table.size());
  for (std::size_t j = 0; j < table.size(); ++j) {
    const auto col = table.prices.col(static_cast<Eigen::Index>(j));
    std::vector<double> series(col.data(), col.data() + col.size());
    columns[j] = config.on_returns ? simple_returns(series) : std::move(series);
  }

  struct Task {
    std::size_t a, b;
    int offset;
  };
  std::vector<Task> tasks;
  for (std::size_t a = 0; a < table.size(); ++a)
    for (std::size_t b = a + 1; b < table.size(); ++b)
      for (const int offset : config.offsets) tasks.push_back({a, b, offset});

  std::vector<CorrSeries> panel(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    const auto& task = tasks[i];
    CorrSeries series;
    series.ticker_a = table.tickers[task.a];
    series.ticker_b = table.tickers[task.b];
    series.offset = task.offset;
    try {
      series.values = rolling_correlation(columns[task.a], columns[task.b], config.window,
                                          config.stride, task.offset, config.series_len);
    } catch (const std::exception& e) {
      throw std::runtime_error("pair (" + series.ticker_a + "," + series.ticker_b + ") offset " +
                               std::to_string(task.offset) + ": " + e.what());
    }
    if (static_cast<int>(series.values.size()) < config.series_len)
      throw std::runtime_error("pair (" + series.ticker_a + "," + series.ticker_b + ") offset " +
                               std::to_string(task.offset) + ": only " +
                               std::to_string(series.values.size()) + " windows, need " +
                               std::to_string(config.series_len));
    panel[i] = std::move(series);
  });
  return panel;
}

/// Cut the four overlapping 21-step walk-forward slices from a 24-step series.
inline WalkForwardSlices split_walk_forward(const CorrSeries& series) {
  if (static_cast<int>(series.values.size()) != kSeriesLen)
    throw std::invalid_argument("split_walk_forward: series must have exactly 24 steps");
  WalkForwardSlices out;
  for (int s = 0; s < 4; ++s)
    out.slices[static_cast<std::size_t>(s)]
        .assign(series.values.begin() + s, series.values.begin() + s + kSliceLen);
  return out;
}

// ---------------------------------------------------------------------------
// Panel and slice files.

inline void write_panel(const std::string& path, const std::vector<CorrSeries>& panel,
                        const std::string& meta) {
  csv::Writer out(path);
  out.comment(meta);
  std::vector<std::string> header = {"ticker_i", "ticker_j", "offset"};
  const int len = panel.empty() ? kSeriesLen : static_cast<int>(panel.front().values.size());
  for (int k = 1; k <= len; ++k) header.push_back("v" + std::to_string(k));
  out.row(header);
  std::vector<std::string> fields;
  for (const auto& series : panel) {
    fields.clear();
    fields.push_back(series.ticker_a);
    fields.push_back(series.ticker_b);
    fields.push_back(std::to_string(series.offset));
    for (const double v : series.values) fields.push_back(csv::format_double(v));
    out.row(fields);
  }
}

inline std::vector<CorrSeries> read_panel(const std::string& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty()) throw std::runtime_error("empty panel file: " + path);
  std::vector<CorrSeries> panel;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() < 4) throw std::runtime_error("panel row " + std::to_string(r) + " too short");
    CorrSeries series;
    series.ticker_a = cells[0];
    series.ticker_b = cells[1];
    series.offset = static_cast<int>(csv::to_double(cells[2], "panel offset"));
    for (std::size_t c = 3; c < cells.size(); ++c)
      series.values.push_back(csv::to_double(cells[c], "panel value"));
    panel.push_back(std::move(series));
  }
  return panel;
}

}  // namespace corrcast::corr
