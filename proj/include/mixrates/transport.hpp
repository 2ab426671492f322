#pragma once

#include "mixrates/measure.hpp"

#include <span>
#include <vector>

namespace mixrates {

enum class CostKind { PowerOfDistance, CellDependent, Custom };

/// Nonnegative finite ground costs between k source and k' target atoms.
class CostMatrix {
 public:
  CostMatrix(Matrix values, CostKind kind = CostKind::Custom);

  const Matrix& values() const noexcept { return values_; }
  CostKind kind() const noexcept { return kind_; }
  int rows() const noexcept { return static_cast<int>(values_.rows()); }
  int cols() const noexcept { return static_cast<int>(values_.cols()); }
  double operator()(int i, int j) const { return values_(i, j); }

 private:
  Matrix values_;
  CostKind kind_;
};

/// Joint mass matrix whose row and column sums are the source and target weights.
struct Coupling {
  Matrix plan;
  std::vector<double> source;
  std::vector<double> target;
};

struct TransportSolution {
  double value;
  Coupling coupling;
};

inline constexpr int kMaxSupport = 64;

/// Exact discrete optimal transport by the transportation simplex
/// (network simplex on the bipartite graph, northwest-corner start).
///
/// The returned value is the LP optimum; among tied optimal plans, the
/// vertex returned is whichever the pivoting reaches.
///
/// Throws DimensionMismatch, SupportTooLarge (either side above 64 atoms),
/// InvalidWeights, or InfeasibleMarginals when the two masses differ by
/// more than 1e-6.
TransportSolution solve_ot(std::span<const double> source, std::span<const double> target, const CostMatrix& cost);

/// cost(i, j) = D(theta_i, theta'_j)^r under the given metric.
CostMatrix distance_power_cost(const MixingMeasure& g, const MixingMeasure& g2, double r, MetricKind metric);

/// W_r(G, G2) = (min_q sum q_ij D^r)^(1/r).
double wasserstein(const MixingMeasure& g, const MixingMeasure& g2, double r, MetricKind metric = MetricKind::MeanOnly);

}  // namespace mixrates
