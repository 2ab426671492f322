#include "mixrates/transport.hpp"

#include "mixrates/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mixrates {

namespace {

constexpr double kMarginalGap = 1e-6;

struct Cell {
  int row;
  int col;
};

/// Transportation simplex over a spanning-tree basis of m + n - 1 cells.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand, const Matrix& cost)
      : m_(static_cast<int>(supply.size())),
        n_(static_cast<int>(demand.size())),
        cost_(cost),
        flow_(Matrix::Zero(m_, n_)),
        basic_(m_ * n_, false) {
    northwest_corner(std::move(supply), std::move(demand));
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    tol_ = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  }

  void run() {
    std::vector<double> u(m_), v(n_);
    int degenerate_streak = 0;
    const int bland_after = m_ * n_;
    const long max_pivots = 50L * m_ * n_ * (m_ + n_) + 1000;
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      potentials(u, v);
      const bool bland = degenerate_streak > bland_after;
      Cell entering{-1, -1};
      double best = -tol_;
      for (int i = 0; i < m_ && !(bland && entering.row >= 0); ++i) {
        for (int j = 0; j < n_; ++j) {
          if (basic_[index(i, j)]) continue;
          const double reduced = cost_(i, j) - u[i] - v[j];
          if (reduced < best) {
            best = reduced;
            entering = {i, j};
            if (bland) break;
          }
        }
      }
      if (entering.row < 0) return;
      const double theta = pivot_on(entering);
      degenerate_streak = theta > 0.0 ? 0 : degenerate_streak + 1;
    }
    throw Error(ErrorKind::InvalidArgument, "transportation simplex exceeded its pivot budget");
  }

  Matrix plan() const { return flow_.cwiseMax(0.0); }

 private:
  int index(int i, int j) const { return i * n_ + j; }

  void northwest_corner(std::vector<double> supply, std::vector<double> demand) {
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(supply[i], demand[j]);
      add_basic({i, j}, f);
      supply[i] -= f;
      demand[j] -= f;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1) {
        ++j;
      } else if (j == n_ - 1) {
        ++i;
      } else if (supply[i] <= demand[j]) {
        ++i;  // on an exact tie the next cell carries zero flow and keeps the basis a tree
      } else {
        ++j;
      }
    }
    // Any rounding residue lands in the last cell.
    flow_(m_ - 1, n_ - 1) += std::max(0.0, std::min(supply[m_ - 1], demand[n_ - 1]));
  }

  void add_basic(Cell c, double f) {
    basis_.push_back(c);
    basic_[index(c.row, c.col)] = true;
    flow_(c.row, c.col) = f;
  }

  // Nodes 0..m-1 are rows, m..m+n-1 columns.
  void build_adjacency() {
    adjacency_.assign(static_cast<std::size_t>(m_ + n_), {});
    for (std::size_t e = 0; e < basis_.size(); ++e) {
      adjacency_[basis_[e].row].push_back(static_cast<int>(e));
      adjacency_[m_ + basis_[e].col].push_back(static_cast<int>(e));
    }
  }

  int other_end(int node, const Cell& c) const { return node < m_ ? m_ + c.col : c.row; }

  void potentials(std::vector<double>& u, std::vector<double>& v) {
    build_adjacency();
    std::vector<bool> seen(static_cast<std::size_t>(m_ + n_), false);
    std::vector<int> stack{0};
    seen[0] = true;
    u[0] = 0.0;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int e : adjacency_[node]) {
        const Cell& c = basis_[e];
        const int next = other_end(node, c);
        if (seen[next]) continue;
        seen[next] = true;
        if (next >= m_) {
          v[c.col] = cost_(c.row, c.col) - u[c.row];
        } else {
          u[c.row] = cost_(c.row, c.col) - v[c.col];
        }
        stack.push_back(next);
      }
    }
  }

  // Returns the pivot step length.
  double pivot_on(Cell entering) {
    // Tree path from the entering column back to the entering row.
    const int source = entering.row;
    const int target = m_ + entering.col;
    std::vector<int> parent_edge(static_cast<std::size_t>(m_ + n_), -1);
    std::vector<bool> seen(static_cast<std::size_t>(m_ + n_), false);
    std::vector<int> queue{source};
    seen[source] = true;
    for (std::size_t head = 0; head < queue.size() && !seen[target]; ++head) {
      const int node = queue[head];
      for (int e : adjacency_[node]) {
        const int next = other_end(node, basis_[e]);
        if (seen[next]) continue;
        seen[next] = true;
        parent_edge[next] = e;
        queue.push_back(next);
      }
    }
    std::vector<int> path;  // path[0] touches the entering column
    for (int node = target; node != source;) {
      const int e = parent_edge[node];
      path.push_back(e);
      node = other_end(node, basis_[e]);
    }

    // Odd positions along the cycle (path[0], path[2], ...) lose flow.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const Cell& c = basis_[path[p]];
      const double f = flow_(c.row, c.col);
      if (f < theta || (f == theta && path[p] < leaving)) {
        theta = f;
        leaving = path[p];
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t p = 0; p < path.size(); ++p) {
      const Cell& c = basis_[path[p]];
      flow_(c.row, c.col) += (p % 2 == 0) ? -theta : theta;
    }
    const Cell out = basis_[leaving];
    flow_(out.row, out.col) = 0.0;
    basic_[index(out.row, out.col)] = false;
    basis_[leaving] = entering;
    basic_[index(entering.row, entering.col)] = true;
    flow_(entering.row, entering.col) = theta;
    return theta;
  }

  int m_;
  int n_;
  const Matrix& cost_;
  Matrix flow_;
  std::vector<bool> basic_;
  std::vector<Cell> basis_;
  std::vector<std::vector<int>> adjacency_;
  double tol_;
};

void check_weights(std::span<const double> w, const char* side) {
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorKind::InvalidWeights, std::string(side) + " weights must be finite and nonnegative");
    }
  }
}

}  // namespace

CostMatrix::CostMatrix(Matrix values, CostKind kind) : values_(std::move(values)), kind_(kind) {
  if (values_.size() == 0) throw Error(ErrorKind::DimensionMismatch, "cost matrix is empty");
  if (!values_.allFinite() || values_.minCoeff() < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "cost entries must be finite and nonnegative");
  }
}

TransportSolution solve_ot(std::span<const double> source, std::span<const double> target, const CostMatrix& cost) {
  const int m = static_cast<int>(source.size());
  const int n = static_cast<int>(target.size());
  if (m != cost.rows() || n != cost.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "cost is " + std::to_string(cost.rows()) + "x" +
                                                  std::to_string(cost.cols()) + " but weights are " +
                                                  std::to_string(m) + " and " + std::to_string(n));
  }
  if (m > kMaxSupport || n > kMaxSupport) {
    throw Error(ErrorKind::SupportTooLarge, "support sizes are capped at " + std::to_string(kMaxSupport));
  }
  check_weights(source, "source");
  check_weights(target, "target");
  const double mass_src = std::accumulate(source.begin(), source.end(), 0.0);
  const double mass_tgt = std::accumulate(target.begin(), target.end(), 0.0);
  if (std::abs(mass_src - mass_tgt) > kMarginalGap) {
    throw Error(ErrorKind::InfeasibleMarginals, "source mass " + std::to_string(mass_src) + " != target mass " +
                                                    std::to_string(mass_tgt));
  }

  std::vector<double> supply(source.begin(), source.end());
  std::vector<double> demand(target.begin(), target.end());
  if (mass_tgt > 0.0) {
    for (double& x : demand) x *= mass_src / mass_tgt;
  }

  TransportSimplex simplex(std::move(supply), std::move(demand), cost.values());
  simplex.run();
  Matrix plan = simplex.plan();
  const double value = plan.cwiseProduct(cost.values()).sum();
  return {value, Coupling{std::move(plan), {source.begin(), source.end()}, {target.begin(), target.end()}}};
}

CostMatrix distance_power_cost(const MixingMeasure& g, const MixingMeasure& g2, double r, MetricKind metric) {
  Matrix c(g.order(), g2.order());
  for (int i = 0; i < g.order(); ++i) {
    for (int j = 0; j < g2.order(); ++j) {
      c(i, j) = std::pow(atom_distance(g.atom(i), g2.atom(j), metric), r);
    }
  }
  return CostMatrix(std::move(c), CostKind::PowerOfDistance);
}

double wasserstein(const MixingMeasure& g, const MixingMeasure& g2, double r, MetricKind metric) {
  if (!(r >= 1.0) || !std::isfinite(r)) throw Error(ErrorKind::InvalidArgument, "Wasserstein order must be >= 1");
  if (g.dimension() != g2.dimension()) throw Error(ErrorKind::DimensionMismatch, "measures differ in dimension");
  const TransportSolution sol = solve_ot(g.weights(), g2.weights(), distance_power_cost(g, g2, r, metric));
  return std::pow(std::max(sol.value, 0.0), 1.0 / r);
}

}  // namespace mixrates
