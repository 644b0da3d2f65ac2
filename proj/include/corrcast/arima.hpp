#pragma once

// ARIMA fitting by exact Gaussian maximum likelihood, AIC order selection,
// and one-step in-sample prediction for residual extraction.
//
// Sign convention follows the Box-Jenkins form used throughout this project:
//   w_t = c + sum_k phi_k w_{t-k} - sum_l theta_l e_{t-l} + e_t
// i.e. MA coefficients enter with a minus sign.
//
// The likelihood is evaluated with a Kalman filter on the Harvey state-space
// form of the ARMA process, initialized at the exact stationary state
// covariance, so it equals the dense multivariate-Gaussian density. The
// innovation variance is concentrated out during optimization. Coefficients
// are searched through the partial-autocorrelation reparameterization, which
// keeps every visited point stationary (AR) and invertible (MA).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "corrcast/optimize.hpp"

namespace corrcast::arima {

inline constexpr int kSupervisedLen = 21;  // residual steps per series
inline constexpr int kInputSteps = 20;     // X window; the 21st step is Y
inline constexpr double kSigmaFloor = 1e-12;

struct Order {
  int p = 0;
  int d = 0;
  int q = 0;

  bool operator==(const Order&) const = default;
  std::string str() const {
    return "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
  }
};

/// The default candidate set searched by least AIC.
inline std::vector<Order> default_candidates() {
  return {{1, 1, 0}, {0, 1, 1}, {1, 1, 1}, {2, 1, 1}, {2, 1, 0}};
}

struct Fit {
  Order order;
  double c = 0.0;             // constant term on the differenced scale
  std::vector<double> phi;    // AR coefficients
  std::vector<double> theta;  // MA coefficients (minus convention, see header)
  double sigma2 = 0.0;        // innovation variance
  double loglik = 0.0;
  double aic = 0.0;
  bool degenerate = false;  // sigma2 clamped at its lower bound

  // constant and innovation variance both count as estimated parameters
  int param_count() const { return order.p + order.q + 2; }

  double mean() const {
    double s = 0.0;
    for (const double v : phi) s += v;
    const double denom = 1.0 - s;
    if (std::abs(denom) < 1e-12) throw std::runtime_error("ARMA mean undefined: AR polynomial has a unit root");
    return c / denom;
  }
};

class FitError : public std::runtime_error {
 public:
  FitError(const Order& order, const std::string& what)
      : std::runtime_error("ARIMA" + order.str() + ": " + what), order_(order) {}
  const Order& order() const { return order_; }

 private:
  Order order_;
};

/// d-th order difference; output shrinks by d. Levels beyond d=2 are rejected.
inline std::vector<double> difference(std::span<const double> series, int d) {
  if (d < 0 || d > 2) throw std::invalid_argument("difference: d must be in {0,1,2}");
  if (static_cast<int>(series.size()) <= d)
    throw std::invalid_argument("difference: series too short for differencing level");
  std::vector<double> out(series.begin(), series.end());
  for (int round = 0; round < d; ++round) {
    for (std::size_t t = 0; t + 1 < out.size(); ++t) out[t] = out[t + 1] - out[t];
    out.pop_back();
  }
  return out;
}

inline double aic(double loglik, int k) {
  if (k < 1) throw std::invalid_argument("aic: parameter count must be >= 1");
  return -2.0 * loglik + 2.0 * static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Partial-autocorrelation reparameterization (Levinson-Durbin map).

/// Map partial autocorrelations in (-1,1) to stationary AR coefficients.
inline std::vector<double> pacf_to_ar(std::span<const double> partials) {
  std::vector<double> coef(partials.begin(), partials.end());
  std::vector<double> work(coef.size());
  for (std::size_t k = 1; k < coef.size(); ++k) {
    for (std::size_t j = 0; j < k; ++j) work[j] = coef[j] - partials[k] * coef[k - 1 - j];
    for (std::size_t j = 0; j < k; ++j) coef[j] = work[j];
    coef[k] = partials[k];
  }
  return coef;
}

/// Inverse map. Returns false when the coefficients are not stationary.
inline bool ar_to_pacf(std::span<const double> coef, std::vector<double>& partials) {
  std::vector<double> work(coef.begin(), coef.end());
  partials.assign(coef.size(), 0.0);
  for (int k = static_cast<int>(coef.size()) - 1; k >= 0; --k) {
    const double r = work[static_cast<std::size_t>(k)];
    if (!(std::abs(r) < 1.0)) return false;
    partials[static_cast<std::size_t>(k)] = r;
    const double denom = 1.0 - r * r;
    std::vector<double> prev(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j)
      prev[static_cast<std::size_t>(j)] =
          (work[static_cast<std::size_t>(j)] + r * work[static_cast<std::size_t>(k - 1 - j)]) / denom;
    work = std::move(prev);
  }
  return true;
}

inline bool is_stationary(std::span<const double> coef) {
  if (coef.empty()) return true;
  std::vector<double> partials;
  return ar_to_pacf(coef, partials);
}

// ---------------------------------------------------------------------------
// Kalman filter on the Harvey state-space form.

struct FilterResult {
  std::vector<double> pred;  // one-step prediction means of the de-meaned series
  std::vector<double> fvar;  // innovation variances scaled by 1/sigma2
  double sumlog = 0.0;       // sum of log(fvar)
  double ssq = 0.0;          // sum of e_t^2 / fvar_t
  bool ok = false;
};

/**
 * Exact one-step prediction decomposition of a zero-mean ARMA(p,q) series.
 * Run with unit innovation variance; scale by sigma2 where needed.
 */
inline FilterResult kalman_arma(std::span<const double> z, std::span<const double> phi,
                                std::span<const double> theta) {
  const int p = static_cast<int>(phi.size());
  const int q = static_cast<int>(theta.size());
  const int r = std::max(p, q + 1);
  const auto n = static_cast<int>(z.size());
  FilterResult res;
  res.pred.resize(static_cast<std::size_t>(n));
  res.fvar.resize(static_cast<std::size_t>(n));

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < p; ++i) T(i, 0) = phi[static_cast<std::size_t>(i)];
  for (int i = 0; i + 1 < r; ++i) T(i, i + 1) = 1.0;
  // minus convention: the state-space MA loadings are the negated thetas
  Eigen::VectorXd R = Eigen::VectorXd::Zero(r);
  R(0) = 1.0;
  for (int j = 0; j < q; ++j) R(j + 1) = -theta[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd RR = R * R.transpose();

  // stationary state covariance: vec(P) = (I - T (x) T)^-1 vec(RR')
  const int rr = r * r;
  Eigen::MatrixXd kron(rr, rr);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < r; ++k)
        for (int l = 0; l < r; ++l) kron(i * r + k, j * r + l) = T(i, j) * T(k, l);
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(rr, rr) - kron;
  Eigen::VectorXd vecRR(rr);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < r; ++i) vecRR(j * r + i) = RR(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) return res;
  const Eigen::VectorXd vecP = lu.solve(vecRR);
  Eigen::MatrixXd P(r, r);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < r; ++i) P(i, j) = vecP(j * r + i);
  P = 0.5 * (P + P.transpose()).eval();

  Eigen::VectorXd a = Eigen::VectorXd::Zero(r);
  for (int t = 0; t < n; ++t) {
    const double f = P(0, 0);
    if (!std::isfinite(f) || f <= 0.0) return res;
    const double e = z[static_cast<std::size_t>(t)] - a(0);
    res.pred[static_cast<std::size_t>(t)] = a(0);
    res.fvar[static_cast<std::size_t>(t)] = f;
    res.sumlog += std::log(f);
    res.ssq += e * e / f;

    const Eigen::VectorXd gain = P.col(0) / f;
    a += gain * e;
    P -= (gain * P.row(0)).eval();

    a = (T * a).eval();
    P = (T * P * T.transpose() + RR).eval();
    P = 0.5 * (P + P.transpose()).eval();
  }
  res.ok = true;
  return res;
}

/**
 * Exact Gaussian log-likelihood of the fitted ARMA model on the series
 * (differenced per fit.order.d before evaluation).
 */
inline double loglikelihood(std::span<const double> series, const Fit& fit) {
  if (!is_stationary(fit.phi)) throw std::runtime_error("loglikelihood: non-stationary AR parameters");
  if (!is_stationary(fit.theta)) throw std::runtime_error("loglikelihood: non-invertible MA parameters");
  if (static_cast<int>(series.size()) <= fit.order.p + fit.order.q)
    throw std::invalid_argument("loglikelihood: series too short");
  if (!(fit.sigma2 > 0.0)) throw std::invalid_argument("loglikelihood: sigma2 must be positive");

  const std::vector<double> w = difference(series, fit.order.d);
  const double mu = fit.mean();
  std::vector<double> z(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - mu;

  const FilterResult filt = kalman_arma(z, fit.phi, fit.theta);
  if (!filt.ok) throw std::runtime_error("loglikelihood: filter failed (parameters near unit circle)");
  const auto n = static_cast<double>(z.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * fit.sigma2) - 0.5 * filt.sumlog -
         filt.ssq / (2.0 * fit.sigma2);
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fitting.

struct FitOptions {
  bool estimate_constant = true;
  int max_iterations = 500;
  double tol = 1e-8;
  int css_iterations = 120;  // short conditional-sum-of-squares warm start
};

namespace detail {

inline std::vector<double> unpack_coef(const Eigen::VectorXd& u, int begin, int count) {
  std::vector<double> partials(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) partials[static_cast<std::size_t>(i)] = std::tanh(u(begin + i));
  return pacf_to_ar(partials);
}

inline double css_objective(std::span<const double> w, std::span<const double> phi,
                            std::span<const double> theta, double mu) {
  const int p = static_cast<int>(phi.size());
  const int q = static_cast<int>(theta.size());
  const auto n = static_cast<int>(w.size());
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  double ssq = 0.0;
  for (int t = p; t < n; ++t) {
    double pred = 0.0;
    for (int k = 0; k < p; ++k) pred += phi[static_cast<std::size_t>(k)] * (w[static_cast<std::size_t>(t - 1 - k)] - mu);
    for (int l = 0; l < q; ++l)
      if (t - 1 - l >= 0) pred -= theta[static_cast<std::size_t>(l)] * e[static_cast<std::size_t>(t - 1 - l)];
    const double resid = (w[static_cast<std::size_t>(t)] - mu) - pred;
    e[static_cast<std::size_t>(t)] = resid;
    ssq += resid * resid;
  }
  return std::isfinite(ssq) ? ssq : std::numeric_limits<double>::infinity();
}

/// Yule-Walker partial autocorrelations of w, clamped into (-0.95, 0.95).
inline std::vector<double> initial_partials(std::span<const double> w, int p) {
  std::vector<double> partials(static_cast<std::size_t>(p), 0.0);
  if (p == 0 || w.size() < 3) return partials;
  const auto n = static_cast<double>(w.size());
  double mean = 0.0;
  for (const double v : w) mean += v;
  mean /= n;
  std::vector<double> rho(static_cast<std::size_t>(p) + 1, 0.0);
  double gamma0 = 0.0;
  for (const double v : w) gamma0 += (v - mean) * (v - mean);
  if (gamma0 <= 0.0) return partials;
  for (int k = 1; k <= p && k < static_cast<int>(w.size()); ++k) {
    double s = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < w.size(); ++t)
      s += (w[t] - mean) * (w[t - static_cast<std::size_t>(k)] - mean);
    rho[static_cast<std::size_t>(k)] = s / gamma0;
  }
  // Levinson-Durbin on the sample autocorrelations
  std::vector<double> a(static_cast<std::size_t>(p) + 1, 0.0), prev;
  double den = 1.0;
  for (int k = 1; k <= p; ++k) {
    double num = rho[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j) num -= a[static_cast<std::size_t>(j)] * rho[static_cast<std::size_t>(k - j)];
    if (std::abs(den) < 1e-12) break;
    const double akk = num / den;
    prev = a;
    for (int j = 1; j < k; ++j)
      a[static_cast<std::size_t>(j)] = prev[static_cast<std::size_t>(j)] - akk * prev[static_cast<std::size_t>(k - j)];
    a[static_cast<std::size_t>(k)] = akk;
    den *= (1.0 - akk * akk);
    partials[static_cast<std::size_t>(k - 1)] = std::clamp(akk, -0.95, 0.95);
  }
  return partials;
}

}  // namespace detail

/**
 * Numerically maximized exact Gaussian likelihood over (c, phi, theta) with
 * the innovation variance concentrated out. Throws FitError if the simplex
 * search does not converge, so batch callers can drop the candidate.
 */
inline Fit fit_arma_mle(std::span<const double> series, const Order& order,
                        const FitOptions& options = {}) {
  const int p = order.p, q = order.q;
  if (p < 0 || q < 0) throw std::invalid_argument("fit_arma_mle: negative order");
  if (static_cast<int>(series.size()) < p + q + 3 + order.d)
    throw FitError(order, "series too short (need at least p+q+3 differenced points)");
  const std::vector<double> w = difference(series, order.d);
  const auto n = static_cast<double>(w.size());
  if (static_cast<int>(w.size()) < p + q + 3) throw FitError(order, "differenced series too short");

  const bool with_const = options.estimate_constant;
  const int dim = p + q + (with_const ? 1 : 0);

  double wmean = 0.0, wvar = 0.0;
  for (const double v : w) wmean += v;
  wmean /= n;
  for (const double v : w) wvar += (v - wmean) * (v - wmean);
  wvar /= n;

  const auto unpack = [&](const Eigen::VectorXd& u, std::vector<double>& phi, std::vector<double>& theta,
                          double& mu) {
    phi = detail::unpack_coef(u, 0, p);
    theta = detail::unpack_coef(u, p, q);
    mu = with_const ? u(p + q) : 0.0;
  };

  const auto exact_objective = [&](const Eigen::VectorXd& u) -> double {
    std::vector<double> phi, theta;
    double mu = 0.0;
    unpack(u, phi, theta, mu);
    std::vector<double> z(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - mu;
    const FilterResult filt = kalman_arma(z, phi, theta);
    if (!filt.ok) return std::numeric_limits<double>::infinity();
    const double sigma2 = std::max(filt.ssq / n, kSigmaFloor);
    const double value = n * std::log(sigma2) + filt.sumlog;
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
  };

  // start point: Yule-Walker partials for the AR part, zeros for the MA part
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(dim);
  const auto partials = detail::initial_partials(w, p);
  for (int i = 0; i < p; ++i) u0(i) = std::atanh(partials[static_cast<std::size_t>(i)]);
  if (with_const) u0(p + q) = wmean;

  Eigen::VectorXd step = Eigen::VectorXd::Constant(dim, 0.4);
  if (with_const) step(p + q) = 0.25 * std::sqrt(std::max(wvar, 1e-8));

  if (dim > 0 && options.css_iterations > 0) {
    // conditional-sum-of-squares warm start for the exact-likelihood search
    const auto css = [&](const Eigen::VectorXd& u) -> double {
      std::vector<double> phi, theta;
      double mu = 0.0;
      unpack(u, phi, theta, mu);
      return detail::css_objective(w, phi, theta, mu);
    };
    const auto warm = opt::nelder_mead(css, u0, step, options.css_iterations, 1e-6);
    if (std::isfinite(warm.value)) u0 = warm.x;
  }

  opt::SimplexResult best;
  if (dim > 0) {
    best = opt::nelder_mead(exact_objective, u0, step, options.max_iterations, options.tol);
    if (!best.converged || !std::isfinite(best.value))
      throw FitError(order, "likelihood optimization did not converge");
  } else {
    best.x = u0;
    best.value = exact_objective(u0);
    best.converged = true;
  }

  Fit fit;
  fit.order = order;
  double mu = 0.0;
  unpack(best.x, fit.phi, fit.theta, mu);

  std::vector<double> z(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - mu;
  const FilterResult filt = kalman_arma(z, fit.phi, fit.theta);
  if (!filt.ok) throw FitError(order, "filter failed at optimum");
  fit.sigma2 = std::max(filt.ssq / n, kSigmaFloor);
  fit.degenerate = filt.ssq / n < kSigmaFloor;
  double phi_sum = 0.0;
  for (const double v : fit.phi) phi_sum += v;
  fit.c = mu * (1.0 - phi_sum);
  fit.loglik = -0.5 * n * std::log(2.0 * std::numbers::pi * fit.sigma2) - 0.5 * filt.sumlog -
               filt.ssq / (2.0 * fit.sigma2);
  fit.aic = aic(fit.loglik, fit.param_count());
  return fit;
}

/**
 * Least-AIC fit among the candidate orders. Candidates that fail to fit are
 * skipped (optionally counted); ties go to fewer parameters, then to the
 * earlier candidate.
 */
inline Fit select_best_order(std::span<const double> series, std::span<const Order> candidates,
                             int* failed_count = nullptr, const FitOptions& options = {}) {
  if (candidates.empty()) throw std::invalid_argument("select_best_order: no candidates");
  bool have = false;
  Fit best;
  int failures = 0;
  for (const auto& order : candidates) {
    try {
      Fit fit = fit_arma_mle(series, order, options);
      if (!have || fit.aic < best.aic ||
          (fit.aic == best.aic && fit.param_count() < best.param_count())) {
        best = std::move(fit);
        have = true;
      }
    } catch (const FitError&) {
      ++failures;
    }
  }
  if (failed_count) *failed_count = failures;
  if (!have) throw std::runtime_error("no fit: all candidate orders failed");
  return best;
}

/**
 * One-step-ahead fitted values for the original (undifferenced) series.
 * The first d values have no prior difference to predict from and are set to
 * the observed values, so their residuals are zero.
 */
inline std::vector<double> in_sample_predict(const Fit& fit, std::span<const double> series) {
  const int d = fit.order.d;
  if (static_cast<int>(series.size()) <= d + fit.order.p + fit.order.q)
    throw std::invalid_argument("in_sample_predict: series too short for the fitted model");
  const std::vector<double> w = difference(series, d);
  const double mu = fit.mean();
  std::vector<double> z(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - mu;
  const FilterResult filt = kalman_arma(z, fit.phi, fit.theta);
  if (!filt.ok) throw std::runtime_error("in_sample_predict: filter failed");

  std::vector<double> out(series.size());
  for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = series[static_cast<std::size_t>(i)];
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double what = filt.pred[j] + mu;  // predicted difference
    const std::size_t i = j + static_cast<std::size_t>(d);
    if (d == 0)
      out[i] = what;
    else if (d == 1)
      out[i] = series[i - 1] + what;
    else
      out[i] = what + 2.0 * series[i - 1] - series[i - 2];
  }
  return out;
}

inline std::vector<double> residuals(const Fit& fit, std::span<const double> series) {
  const auto pred = in_sample_predict(fit, series);
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = series[i] - pred[i];
  return out;
}

/// ARIMA residual sequence split into the 20-step input X and scalar target Y.
struct SupervisedResidual {
  std::string series_id;
  std::vector<double> x;  // first 20 residuals
  double y = 0.0;         // the 21st residual
};

inline SupervisedResidual extract_xy(std::span<const double> residual_seq, std::string series_id = "") {
  if (static_cast<int>(residual_seq.size()) != kSupervisedLen)
    throw std::invalid_argument("extract_xy: residual sequence must have exactly 21 steps");
  SupervisedResidual out;
  out.series_id = std::move(series_id);
  out.x.assign(residual_seq.begin(), residual_seq.begin() + kInputSteps);
  out.y = residual_seq[kInputSteps];
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics.

/// Sample autocorrelations for lags 0..max_lag (index 0 is always 1).
inline std::vector<double> acf(std::span<const double> series, int max_lag) {
  if (static_cast<int>(series.size()) <= max_lag + 1)
    throw std::invalid_argument("acf: series must be longer than max_lag + 1");
  const auto n = static_cast<double>(series.size());
  double mean = 0.0;
  for (const double v : series) mean += v;
  mean /= n;
  double gamma0 = 0.0;
  for (const double v : series) gamma0 += (v - mean) * (v - mean);
  if (gamma0 <= 0.0) throw std::runtime_error("acf: constant series");
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 1.0);
  for (int k = 1; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < series.size(); ++t)
      s += (series[t] - mean) * (series[t - static_cast<std::size_t>(k)] - mean);
    out[static_cast<std::size_t>(k)] = s / gamma0;
  }
  return out;
}

/// Partial autocorrelations via Durbin-Levinson; index 0 is 1 by convention.
inline std::vector<double> pacf(std::span<const double> series, int max_lag) {
  const auto rho = acf(series, max_lag);
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 1.0);
  std::vector<double> a(static_cast<std::size_t>(max_lag) + 1, 0.0), prev;
  double den = 1.0;
  for (int k = 1; k <= max_lag; ++k) {
    double num = rho[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j) num -= a[static_cast<std::size_t>(j)] * rho[static_cast<std::size_t>(k - j)];
    if (std::abs(den) < 1e-14) throw std::runtime_error("pacf: degenerate recursion");
    const double akk = num / den;
    prev = a;
    for (int j = 1; j < k; ++j)
      a[static_cast<std::size_t>(j)] = prev[static_cast<std::size_t>(j)] - akk * prev[static_cast<std::size_t>(k - j)];
    a[static_cast<std::size_t>(k)] = akk;
    den *= (1.0 - akk * akk);
    out[static_cast<std::size_t>(k)] = akk;
  }
  return out;
}

}  // namespace corrcast::arima
