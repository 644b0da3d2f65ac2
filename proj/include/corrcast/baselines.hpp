#pragma once

// The four classical correlation predictors: full historical, constant
// correlation, single-index (one-factor market model), and multi-group
// (sector-wise constant correlation).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "corrcast/csv.hpp"

namespace corrcast::baselines {

/// Symmetric correlation matrix with unit diagonal over an ordered universe.
struct CorrMatrix {
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;

  int size() const { return static_cast<int>(tickers.size()); }

  void validate() const {
    const auto n = static_cast<Eigen::Index>(tickers.size());
    if (values.rows() != n || values.cols() != n)
      throw std::invalid_argument("CorrMatrix: dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(values(i, i) - 1.0) > 1e-12)
        throw std::invalid_argument("CorrMatrix: diagonal must be 1");
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (std::abs(values(i, j) - values(j, i)) > 1e-12)
          throw std::invalid_argument("CorrMatrix: not symmetric");
        if (values(i, j) < -1.0 - 1e-12 || values(i, j) > 1.0 + 1e-12)
          throw std::invalid_argument("CorrMatrix: entry out of [-1,1]");
      }
    }
  }
};

/// Market-model regression estimates for one asset.
struct BetaEstimate {
  double alpha = 0.0;      // risk-adjusted excess return
  double beta = 0.0;       // sensitivity to the market
  double sigma_eps = 0.0;  // residual-return standard deviation
  double sigma_i = 0.0;    // asset return standard deviation
};

using SectorMap = std::map<std::string, std::string>;

/// Next-period correlation equals last period's (the identity predictor).
inline CorrMatrix full_historical(const CorrMatrix& prev) { return prev; }

/// Every off-diagonal entry becomes the mean of the upper-triangle entries.
inline CorrMatrix constant_correlation(const CorrMatrix& prev) {
  const auto n = static_cast<Eigen::Index>(prev.tickers.size());
  if (n < 2) throw std::invalid_argument("constant_correlation: need at least two assets");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) sum += prev.values(i, j);
  const double mean = sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
  CorrMatrix out;
  out.tickers = prev.tickers;
  out.values = Eigen::MatrixXd::Constant(n, n, mean);
  out.values.diagonal().setOnes();
  return out;
}

/// OLS of asset returns on market returns.
inline BetaEstimate estimate_market_model(std::span<const double> asset_returns,
                                          std::span<const double> market_returns) {
  if (asset_returns.size() != market_returns.size())
    throw std::invalid_argument("estimate_market_model: length mismatch");
  const std::size_t n = asset_returns.size();
  if (n < 3) throw std::invalid_argument("estimate_market_model: need at least three observations");
  double ma = 0.0, mm = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    ma += asset_returns[t];
    mm += market_returns[t];
  }
  ma /= static_cast<double>(n);
  mm /= static_cast<double>(n);
  double cov = 0.0, var_m = 0.0, var_a = 0.0, scale_m = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double da = asset_returns[t] - ma, dm = market_returns[t] - mm;
    cov += da * dm;
    var_m += dm * dm;
    var_a += da * da;
    scale_m += market_returns[t] * market_returns[t];
  }
  // relative guard: a constant market series leaves only rounding residue
  if (var_m <= 1e-20 * std::max(scale_m, 1e-300))
    throw std::runtime_error("estimate_market_model: zero market variance");
  BetaEstimate est;
  est.beta = cov / var_m;
  est.alpha = ma - est.beta * mm;
  est.sigma_i = std::sqrt(var_a / static_cast<double>(n - 1));
  double rss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double resid = asset_returns[t] - est.alpha - est.beta * market_returns[t];
    rss += resid * resid;
  }
  est.sigma_eps = std::sqrt(rss / static_cast<double>(n - 1));
  return est;
}

struct SingleIndexResult {
  CorrMatrix matrix;
  int clipped = 0;  // entries pulled back into [-1,1]
};

/// rho_ij = beta_i beta_j sigma_m^2 / (sigma_i sigma_j), clipped into [-1,1].
inline SingleIndexResult single_index(std::span<const BetaEstimate> betas, double sigma_m,
                                      const std::vector<std::string>& tickers) {
  const auto n = static_cast<Eigen::Index>(betas.size());
  if (static_cast<std::size_t>(n) != tickers.size())
    throw std::invalid_argument("single_index: ticker/estimate count mismatch");
  if (!(sigma_m > 0.0)) throw std::invalid_argument("single_index: sigma_m must be positive");
  for (const auto& b : betas)
    if (!(b.sigma_i > 0.0)) throw std::runtime_error("single_index: zero asset variance");
  SingleIndexResult out;
  out.matrix.tickers = tickers;
  out.matrix.values = Eigen::MatrixXd::Identity(n, n);
  const double var_m = sigma_m * sigma_m;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double rho = betas[static_cast<std::size_t>(i)].beta * betas[static_cast<std::size_t>(j)].beta *
                   var_m /
                   (betas[static_cast<std::size_t>(i)].sigma_i * betas[static_cast<std::size_t>(j)].sigma_i);
      if (rho < -1.0 || rho > 1.0) {
        rho = std::clamp(rho, -1.0, 1.0);
        ++out.clipped;
      }
      out.matrix.values(i, j) = out.matrix.values(j, i) = rho;
    }
  }
  return out;
}

/**
 * Sector-pair means over all ordered admissible pairs (k in alpha, l in beta,
 * k != l); the divisor is n_a (n_b - 1) within a sector and n_a n_b across
 * sectors.
 */
inline CorrMatrix multi_group(const CorrMatrix& prev, const SectorMap& sectors) {
  const auto n = static_cast<Eigen::Index>(prev.tickers.size());
  std::vector<std::string> sector_of(static_cast<std::size_t>(n));
  std::map<std::string, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = sectors.find(prev.tickers[static_cast<std::size_t>(i)]);
    if (it == sectors.end())
      throw std::runtime_error("multi_group: no sector for ticker " +
                               prev.tickers[static_cast<std::size_t>(i)]);
    sector_of[static_cast<std::size_t>(i)] = it->second;
    members[it->second].push_back(i);
  }

  std::map<std::pair<std::string, std::string>, double> pair_mean;
  const auto mean_for = [&](const std::string& a, const std::string& b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    const auto found = pair_mean.find(key);
    if (found != pair_mean.end()) return found->second;
    const auto& ka = members[key.first];
    const auto& kb = members[key.second];
    double sum = 0.0;
    long count = 0;
    for (const auto i : ka)
      for (const auto j : kb) {
        if (i == j) continue;
        sum += prev.values(i, j);
        ++count;
      }
    if (count == 0)
      throw std::runtime_error("multi_group: sector pair (" + key.first + "," + key.second +
                               ") has no admissible asset pairs");
    const double mean = sum / static_cast<double>(count);
    pair_mean[key] = mean;
    return mean;
  };

  CorrMatrix out;
  out.tickers = prev.tickers;
  out.values = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double rho = mean_for(sector_of[static_cast<std::size_t>(i)], sector_of[static_cast<std::size_t>(j)]);
      out.values(i, j) = out.values(j, i) = rho;
    }
  return out;
}

enum class Model { full_historical, constant_correlation, single_index, multi_group };

inline std::string model_name(Model m) {
  switch (m) {
    case Model::full_historical: return "Full Historical";
    case Model::constant_correlation: return "Constant Correlation";
    case Model::single_index: return "Single-Index";
    case Model::multi_group: return "Multi-Group";
  }
  throw std::logic_error("model_name: unknown model");
}

/**
 * Baseline prediction for one pair given the previous-step correlation matrix
 * and the model-specific auxiliary data (sector map, or a precomputed
 * single-index matrix).
 */
inline double predict_series(Model model, const CorrMatrix& prev, int i, int j,
                             const SectorMap* sectors = nullptr,
                             const CorrMatrix* single_index_matrix = nullptr) {
  if (i == j) throw std::invalid_argument("predict_series: need a proper pair");
  switch (model) {
    case Model::full_historical:
      return prev.values(i, j);
    case Model::constant_correlation:
      return constant_correlation(prev).values(i, j);
    case Model::single_index:
      if (!single_index_matrix) throw std::runtime_error("predict_series: single-index matrix missing");
      return single_index_matrix->values(i, j);
    case Model::multi_group:
      if (!sectors) throw std::runtime_error("predict_series: sector map missing");
      return multi_group(prev, *sectors).values(i, j);
  }
  throw std::logic_error("predict_series: unknown model");
}

/// ticker,sector rows; header optional.
inline SectorMap load_sector_map(const std::string& path) {
  const auto rows = csv::read_rows(path);
  SectorMap map;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != 2) throw std::runtime_error("sector map row " + std::to_string(r + 1) + " needs 2 cells");
    if (r == 0 && cells[0] == "ticker") continue;
    map[cells[0]] = cells[1];
  }
  if (map.empty()) throw std::runtime_error("empty sector map: " + path);
  return map;
}

}  // namespace corrcast::baselines
