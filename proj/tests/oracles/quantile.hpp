#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace oracle {

/// W_r^r between two discrete measures on the real line by the monotone
/// (sorted quantile) coupling.
inline double quantile_transport_cost(std::vector<double> x, std::vector<double> p, std::vector<double> y,
                                      std::vector<double> q, double r) {
  auto sort_by_location = [](std::vector<double>& loc, std::vector<double>& w) {
    std::vector<std::size_t> order(loc.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return loc[a] < loc[b]; });
    std::vector<double> l2, w2;
    for (std::size_t i : order) {
      l2.push_back(loc[i]);
      w2.push_back(w[i]);
    }
    loc = std::move(l2);
    w = std::move(w2);
  };
  sort_by_location(x, p);
  sort_by_location(y, q);
  double total = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double mass = std::min(p[i], q[j]);
    total += mass * std::pow(std::abs(x[i] - y[j]), r);
    p[i] -= mass;
    q[j] -= mass;
    if (p[i] <= 1e-15) ++i;
    if (j < y.size() && q[j] <= 1e-15) ++j;
  }
  return total;
}

}  // namespace oracle
