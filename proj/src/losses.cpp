#include "mixrates/losses.hpp"

#include "mixrates/error.hpp"
#include "mixrates/transport.hpp"

#include <cmath>
#include <string>

namespace mixrates {

namespace {

constexpr double kSystemTol = 1e-10;

void require_location_only(const MixingMeasure& g, const char* which) {
  if (g.has_atom_covariances()) {
    throw Error(ErrorKind::MetricMismatch,
                std::string(which) + " carries per-atom covariances but the loss uses the mean-only metric");
  }
}

// sum_j |sum_{i in A_j} p_i - p0_j|
double weight_gap(const MixingMeasure& g, const MixingMeasure& g0, const VoronoiPartition& part) {
  double total = 0.0;
  for (int j = 0; j < g0.order(); ++j) {
    double mass = 0.0;
    for (int i : part.cells[static_cast<std::size_t>(j)]) mass += g.weight(i);
    total += std::abs(mass - g0.weight(j));
  }
  return total;
}

}  // namespace

RBarTable::RBarTable() : table_{{2, 4}, {3, 6}} {}

RBarTable RBarTable::with_override(int cell_size, int exponent) const {
  if (cell_size < 2) throw Error(ErrorKind::InvalidArgument, "rbar is defined for cells of size >= 2");
  if (exponent < 4 || exponent % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument, "rbar values are even integers >= 4");
  }
  RBarTable copy = *this;
  copy.table_[cell_size] = exponent;
  return copy;
}

int RBarTable::at(int cell_size) const {
  const auto it = table_.find(cell_size);
  if (it == table_.end()) {
    throw Error(ErrorKind::UnsupportedCellOrder, "rbar(" + std::to_string(cell_size) + ") is not known");
  }
  return it->second;
}

int rbar(int cell_size, const RBarTable& table) {
  if (cell_size < 2) throw Error(ErrorKind::InvalidArgument, "rbar is defined for k' >= 2");
  return table.at(cell_size);
}

double loss_d(const MixingMeasure& g, const MixingMeasure& g0) {
  require_location_only(g, "G");
  require_location_only(g0, "G0");
  const VoronoiPartition part = voronoi_cells(g, g0, MetricKind::MeanOnly);
  double total = 0.0;
  for (const auto& cell : part.cells) {
    const bool squared = cell.size() > 1;
    for (int i : cell) {
      const double dist = part.distance[static_cast<std::size_t>(i)];
      total += g.weight(i) * (squared ? dist * dist : dist);
    }
  }
  return total + weight_gap(g, g0, part);
}

double loss_dbar(const MixingMeasure& g, const MixingMeasure& g0, const RBarTable& table) {
  const VoronoiPartition part = voronoi_cells(g, g0, MetricKind::Composite);
  double total = 0.0;
  for (std::size_t j = 0; j < part.cells.size(); ++j) {
    const auto& cell = part.cells[j];
    if (cell.empty()) continue;
    const Atom& generator = g0.atom(static_cast<int>(j));
    if (cell.size() == 1) {
      total += g.weight(cell.front()) * part.distance[static_cast<std::size_t>(cell.front())];
      continue;
    }
    const int r = table.at(static_cast<int>(cell.size()));
    for (int i : cell) {
      const DistanceParts dist = atom_distance_parts(g.atom(i), generator);
      total += g.weight(i) * (std::pow(dist.mean, r) + std::pow(dist.covariance, r / 2));
    }
  }
  return total + weight_gap(g, g0, part);
}

double loss_wtilde(const MixingMeasure& g, const MixingMeasure& g2, const MixingMeasure& g_star) {
  if (g.dimension() != 1 || g2.dimension() != 1 || g_star.dimension() != 1) {
    throw Error(ErrorKind::DimensionUnsupported, "the generalized transport loss is defined for d = 1 only");
  }
  require_location_only(g, "G");
  require_location_only(g2, "G'");
  require_location_only(g_star, "G*");
  const VoronoiPartition cells_g = voronoi_cells(g, g_star, MetricKind::MeanOnly);
  const VoronoiPartition cells_g2 = voronoi_cells(g2, g_star, MetricKind::MeanOnly);

  Matrix cost(g.order(), g2.order());
  for (int i = 0; i < g.order(); ++i) {
    const int cell = cells_g.assignment[static_cast<std::size_t>(i)];
    for (int j = 0; j < g2.order(); ++j) {
      if (cells_g2.assignment[static_cast<std::size_t>(j)] != cell) {
        cost(i, j) = 1.0;
        continue;
      }
      const int exponent = static_cast<int>(cells_g.cells[static_cast<std::size_t>(cell)].size() +
                                            cells_g2.cells[static_cast<std::size_t>(cell)].size()) - 1;
      cost(i, j) = std::pow(std::abs(g.atom(i).mean[0] - g2.atom(j).mean[0]), exponent);
    }
  }
  return solve_ot(g.weights(), g2.weights(), CostMatrix(std::move(cost), CostKind::CellDependent)).value;
}

bool PolynomialSystemCandidate::nontrivial() const noexcept {
  bool any_a = false;
  for (double x : a) any_a = any_a || x != 0.0;
  for (double x : c) {
    if (x == 0.0) return false;
  }
  return any_a && !c.empty();
}

double polynomial_system_residual(const PolynomialSystemCandidate& cand, int alpha) {
  double total = 0.0;
  for (std::size_t j = 0; j < cand.c.size(); ++j) {
    const double weight = cand.c[j] * cand.c[j];
    for (int n2 = 0; 2 * n2 <= alpha; ++n2) {
      const int n1 = alpha - 2 * n2;
      total += weight * std::pow(cand.a[j], n1) * std::pow(cand.b[j], n2) / (std::tgamma(n1 + 1.0) * std::tgamma(n2 + 1.0));
    }
  }
  return total;
}

bool verify_polynomial_system_solution(const PolynomialSystemCandidate& cand) {
  if (cand.order < 1) throw Error(ErrorKind::InvalidArgument, "system order must be >= 1");
  if (cand.a.size() != cand.b.size() || cand.a.size() != cand.c.size()) {
    throw Error(ErrorKind::InvalidArgument, "a, b, c must have equal length");
  }
  if (cand.c.size() < 2) throw Error(ErrorKind::InvalidArgument, "the system needs k' >= 2 unknown triples");
  if (!cand.nontrivial()) return false;
  for (int alpha = 1; alpha <= cand.order; ++alpha) {
    if (!(std::abs(polynomial_system_residual(cand, alpha)) <= kSystemTol)) return false;
  }
  return true;
}

}  // namespace mixrates
