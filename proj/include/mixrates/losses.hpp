#pragma once

#include "mixrates/measure.hpp"

#include <map>
#include <vector>

namespace mixrates {

/// Exponents rbar(k') for Voronoi cells holding k' >= 2 fitted atoms of a
/// location-scale Gaussian mixture. Seeded with the two known values
/// rbar(2) = 4 and rbar(3) = 6; other entries only by explicit override.
class RBarTable {
 public:
  RBarTable();

  /// Adds or replaces an entry. The exponent must be an even integer >= 4 and k' >= 2.
  RBarTable with_override(int cell_size, int exponent) const;

  /// Throws UnsupportedCellOrder when cell_size is absent.
  int at(int cell_size) const;
  bool contains(int cell_size) const noexcept { return table_.count(cell_size) != 0; }
  const std::map<int, int>& entries() const noexcept { return table_; }

 private:
  std::map<int, int> table_;
};

/// Table lookup; throws InvalidArgument for k' < 2, UnsupportedCellOrder when absent.
int rbar(int cell_size, const RBarTable& table = RBarTable());

/// Strongly identifiable loss: squared distances in cells with several atoms,
/// plain distances in singleton cells, plus the cellwise weight gaps.
/// Mean-only metric; throws MetricMismatch if either measure carries
/// per-atom covariances.
double loss_d(const MixingMeasure& g, const MixingMeasure& g0);

/// Location-scale Gaussian loss over the composite-metric Voronoi cells.
/// Cells with k' >= 2 atoms use mean distances to the power rbar(k') and
/// Frobenius covariance distances to the power rbar(k')/2.
double loss_dbar(const MixingMeasure& g, const MixingMeasure& g0, const RBarTable& table = RBarTable());

/// Generalized transport cost for d = 1. Atoms of g and g2 are grouped into
/// cells of g_star; a pair in the same cell l costs |x - y| raised to
/// |A_l(g)| + |A_l(g2)| - 1, any other pair costs 1.
/// Throws DimensionUnsupported when d > 1.
double loss_wtilde(const MixingMeasure& g, const MixingMeasure& g2, const MixingMeasure& g_star);

/// Candidate solution (a_j, b_j, c_j), j = 1..k', of the Gaussian
/// moment system truncated at order r.
struct PolynomialSystemCandidate {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
  int order;

  /// Every c_j nonzero and at least one a_j nonzero.
  bool nontrivial() const noexcept;
};

/// Residual of equation alpha:
///   sum_j sum_{n1 + 2 n2 = alpha} c_j^2 a_j^n1 b_j^n2 / (n1! n2!).
double polynomial_system_residual(const PolynomialSystemCandidate& cand, int alpha);

/// True iff the candidate is nontrivial and every equation alpha = 1..order
/// holds to 1e-10. Throws InvalidArgument for order < 1, k' < 2 or ragged input.
bool verify_polynomial_system_solution(const PolynomialSystemCandidate& cand);

}  // namespace mixrates
