#pragma once

// Seeded synthetic data: ARMA/ARIMA process simulators for tests, and a
// factor-model price panel whose pair correlations carry a slowly cycling
// common-factor regime, so generated correlation series have real temporal
// structure instead of being white noise.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrcast/csv.hpp"
#include "corrcast/market_data.hpp"
#include "corrcast/rng.hpp"

namespace corrcast::sim {

/// Simulate x_t = mean_offset + sum phi_k x_{t-k} - sum theta_l e_{t-l} + e_t.
inline std::vector<double> simulate_arma(std::size_t n, std::span<const double> phi,
                                         std::span<const double> theta, double sigma, Rng& rng,
                                         std::size_t burnin = 200, double mean_offset = 0.0) {
  const std::size_t total = n + burnin;
  std::vector<double> x(total, 0.0), e(total, 0.0);
  for (std::size_t t = 0; t < total; ++t) {
    e[t] = rng.normal(0.0, sigma);
    double value = mean_offset + e[t];
    for (std::size_t k = 0; k < phi.size(); ++k)
      if (t > k) value += phi[k] * x[t - k - 1];
    for (std::size_t l = 0; l < theta.size(); ++l)
      if (t > l) value -= theta[l] * e[t - l - 1];
    x[t] = value;
  }
  return {x.begin() + static_cast<long>(burnin), x.end()};
}

/// Integrate an ARMA simulation d times (cumulative sums starting at zero).
inline std::vector<double> simulate_arima(std::size_t n, std::span<const double> phi,
                                          std::span<const double> theta, int d, double sigma,
                                          Rng& rng, std::size_t burnin = 200) {
  std::vector<double> x = simulate_arma(n, phi, theta, sigma, rng, burnin);
  for (int round = 0; round < d; ++round) {
    double acc = 0.0;
    for (double& v : x) {
      acc += v;
      v = acc;
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Synthetic price panels.

struct PanelSpec {
  int days = 2517;
  int tickers = 150;
  std::uint64_t seed = 7;
  double missing_rate = 0.0;  // chance per cell of starting a missing burst
  int missing_burst = 1;      // consecutive missing days per burst
  int sectors = 5;
  // factor-strength regime: multiplier 1 + amp * sin(2 pi t / period + phase)
  double regime_period = 600.0;
  double regime_amp = 0.8;
  double factor_vol = 0.012;
  double idio_vol_lo = 0.006;
  double idio_vol_hi = 0.012;
  double beta_lo = 0.7;
  double beta_hi = 1.3;
};

namespace detail {

// civil date from a day serial (days since 1970-01-01), Gregorian calendar
inline std::string iso_date(long serial) {
  long z = serial + 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned month = mp < 10 ? mp + 3 : mp - 9;
  const long year = y + (month <= 2);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04ld-%02u-%02u", year, month, day);
  return buf;
}

}  // namespace detail

inline std::string synthetic_ticker(int index, int width = 4) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "SYN%0*d", width, index + 1);
  return buf;
}

inline std::string sector_label(int ticker_index, int sectors) {
  return "SEC" + std::to_string(ticker_index % std::max(1, sectors) + 1);
}

/**
 * One-factor return model with a cycling factor-strength regime:
 *   r_it = drift_i + beta_i * m(t) * f_t + idio_i * eps_it
 * Prices compound exponentially and stay positive. Optional missing bursts
 * are injected after day zero so forward filling always has a source.
 */
inline data::PriceTable factor_regime_panel(const PanelSpec& spec) {
  if (spec.days < 2 || spec.tickers < 2)
    throw std::invalid_argument("factor_regime_panel: need at least 2 days and 2 tickers");
  Rng rng(spec.seed);

  std::vector<double> beta(static_cast<std::size_t>(spec.tickers));
  std::vector<double> idio(static_cast<std::size_t>(spec.tickers));
  std::vector<double> drift(static_cast<std::size_t>(spec.tickers));
  std::vector<double> price0(static_cast<std::size_t>(spec.tickers));
  for (int j = 0; j < spec.tickers; ++j) {
    beta[static_cast<std::size_t>(j)] = rng.uniform(spec.beta_lo, spec.beta_hi);
    idio[static_cast<std::size_t>(j)] = rng.uniform(spec.idio_vol_lo, spec.idio_vol_hi);
    drift[static_cast<std::size_t>(j)] = rng.uniform(0.0, 3e-4);
    price0[static_cast<std::size_t>(j)] = rng.uniform(20.0, 200.0);
  }
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  data::PriceTable table;
  table.tickers.reserve(static_cast<std::size_t>(spec.tickers));
  for (int j = 0; j < spec.tickers; ++j) table.tickers.push_back(synthetic_ticker(j));
  table.dates.reserve(static_cast<std::size_t>(spec.days));
  const long base_serial = 13879;  // 2008-01-02
  for (int t = 0; t < spec.days; ++t) table.dates.push_back(detail::iso_date(base_serial + t));

  table.prices.resize(spec.days, spec.tickers);
  for (int j = 0; j < spec.tickers; ++j) table.prices(0, j) = price0[static_cast<std::size_t>(j)];
  for (int t = 1; t < spec.days; ++t) {
    const double regime =
        1.0 + spec.regime_amp * std::sin(2.0 * std::numbers::pi * t / spec.regime_period + phase);
    const double factor = rng.normal(0.0, spec.factor_vol);
    for (int j = 0; j < spec.tickers; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const double ret = drift[js] + beta[js] * regime * factor + idio[js] * rng.normal();
      table.prices(t, j) = table.prices(t - 1, j) * std::exp(ret);
    }
  }

  if (spec.missing_rate > 0.0) {
    for (int j = 0; j < spec.tickers; ++j)
      for (int t = 1; t < spec.days; ++t)
        if (rng.uniform() < spec.missing_rate)
          for (int k = 0; k < spec.missing_burst && t + k < spec.days; ++k)
            table.prices(t + k, j) = data::kMissing;
  }
  return table;
}

inline std::vector<std::pair<std::string, std::string>> sector_assignments(const PanelSpec& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(static_cast<std::size_t>(spec.tickers));
  for (int j = 0; j < spec.tickers; ++j)
    out.emplace_back(synthetic_ticker(j), sector_label(j, spec.sectors));
  return out;
}

inline void write_prices_csv(const std::string& path, const data::PriceTable& table,
                             const std::string& meta) {
  csv::Writer out(path);
  out.comment(meta);
  std::vector<std::string> header = {"date"};
  header.insert(header.end(), table.tickers.begin(), table.tickers.end());
  out.row(header);
  std::vector<std::string> fields;
  for (std::size_t i = 0; i < table.days(); ++i) {
    fields.clear();
    fields.push_back(table.dates[i]);
    for (std::size_t j = 0; j < table.size(); ++j) {
      const double v = table.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      fields.push_back(data::is_missing(v) ? "" : csv::format_double(v));
    }
    out.row(fields);
  }
}

inline void write_sectors_csv(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& assignments,
                              const std::string& meta) {
  csv::Writer out(path);
  out.comment(meta);
  out.row(std::vector<std::string>{"ticker", "sector"});
  for (const auto& [ticker, sector] : assignments)
    out.row(std::vector<std::string>{ticker, sector});
}

}  // namespace corrcast::sim
