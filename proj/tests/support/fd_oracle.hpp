#pragma once

// Test-only finite-difference oracle, kept independent of grad::grad_check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace tamplan::testing {

/// Central differences of a scalar function of a flat parameter vector.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double eps = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x);
    x[i] = orig - eps;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace tamplan::testing
