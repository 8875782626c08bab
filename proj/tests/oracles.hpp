#pragma once

// Independent oracles used by the test suites. These deliberately avoid the
// library's pressure/transfer code paths.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

// Root of sum_i ratios_i^t = 1 by scalar bisection.
inline double moran_root(const std::vector<double>& ratios, double tol = 1e-14) {
  auto f = [&](double t) {
    double s = 0.0;
    for (double r : ratios) s += std::pow(r, t);
    return s - 1.0;
  };
  double lo = 0.0, hi = 1.0;
  while (f(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 64.0) throw std::runtime_error("moran_root: no root below 64");
  }
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracles
