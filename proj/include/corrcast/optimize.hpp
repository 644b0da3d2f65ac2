#pragma once

// Derivative-free Nelder-Mead simplex minimizer. Small and deterministic;
// used to maximize ARMA likelihoods over reparameterized coefficients.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace corrcast::opt {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/**
 * Minimize f over R^n starting from x0. `step` sets the initial simplex edge
 * per coordinate. Stops when the simplex value spread falls below tol or
 * after max_iter iterations.
 */
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                 int max_iter = 500, double tol = 1e-8) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  const auto n = x0.size();
  const int m = static_cast<int>(n) + 1;

  std::vector<Eigen::VectorXd> points(static_cast<std::size_t>(m), x0);
  std::vector<double> values(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    if (i > 0) points[static_cast<std::size_t>(i)](i - 1) += step(i - 1) != 0.0 ? step(i - 1) : 0.1;
    values[static_cast<std::size_t>(i)] = f(points[static_cast<std::size_t>(i)]);
  }

  std::vector<int> order(static_cast<std::size_t>(m));
  SimplexResult result;
  for (result.iterations = 0; result.iterations < max_iter; ++result.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
    });
    const int best = order.front(), worst = order.back(), second = order[static_cast<std::size_t>(m - 2)];

    const double fbest = values[static_cast<std::size_t>(best)];
    const double fworst = values[static_cast<std::size_t>(worst)];
    if (std::isfinite(fbest) && std::abs(fworst - fbest) < tol * (1.0 + std::abs(fbest))) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
      if (i != worst) centroid += points[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(m - 1);

    const Eigen::VectorXd reflected = centroid + kReflect * (centroid - points[static_cast<std::size_t>(worst)]);
    const double freflected = f(reflected);

    if (freflected < fbest) {
      const Eigen::VectorXd expanded = centroid + kExpand * (reflected - centroid);
      const double fexpanded = f(expanded);
      if (fexpanded < freflected) {
        points[static_cast<std::size_t>(worst)] = expanded;
        values[static_cast<std::size_t>(worst)] = fexpanded;
      } else {
        points[static_cast<std::size_t>(worst)] = reflected;
        values[static_cast<std::size_t>(worst)] = freflected;
      }
    } else if (freflected < values[static_cast<std::size_t>(second)]) {
      points[static_cast<std::size_t>(worst)] = reflected;
      values[static_cast<std::size_t>(worst)] = freflected;
    } else {
      const bool outside = freflected < fworst;
      const Eigen::VectorXd base = outside ? reflected : points[static_cast<std::size_t>(worst)];
      const Eigen::VectorXd contracted = centroid + kContract * (base - centroid);
      const double fcontracted = f(contracted);
      if (fcontracted < std::min(freflected, fworst)) {
        points[static_cast<std::size_t>(worst)] = contracted;
        values[static_cast<std::size_t>(worst)] = fcontracted;
      } else {
        // shrink toward the best vertex
        for (int i = 0; i < m; ++i) {
          if (i == best) continue;
          points[static_cast<std::size_t>(i)] =
              points[static_cast<std::size_t>(best)] +
              kShrink * (points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(best)]);
          values[static_cast<std::size_t>(i)] = f(points[static_cast<std::size_t>(i)]);
        }
      }
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  result.value = *best_it;
  result.x = points[static_cast<std::size_t>(std::distance(values.begin(), best_it))];
  return result;
}

}  // namespace corrcast::opt
