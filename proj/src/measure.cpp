#include "mixrates/measure.hpp"

#include "mixrates/error.hpp"
#include "mixrates/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace mixrates {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kSumTol = 1e-12;
// Inputs further than this from a probability vector are rejected rather than renormalized.
constexpr double kSumReject = 1e-6;
constexpr int kStackDim = 32;

thread_local std::uint64_t g_distance_evaluations = 0;

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSpace

ParameterSpace::ParameterSpace(Vector lower, Vector upper, double eig_min, double eig_max, ScaleMode mode)
    : lower_(std::move(lower)), upper_(std::move(upper)), eig_min_(eig_min), eig_max_(eig_max), mode_(mode) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "parameter space bounds must be nonempty and of equal length");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i]) || !std::isfinite(lower_[i]) || !std::isfinite(upper_[i])) {
      throw Error(ErrorKind::InvalidArgument, "parameter space requires finite lower < upper in every coordinate");
    }
  }
  if (!(eig_min_ > 0.0) || !(eig_min_ < eig_max_) || !std::isfinite(eig_max_)) {
    throw Error(ErrorKind::InvalidArgument, "eigenvalue interval must satisfy 0 < min < max < inf");
  }
}

ParameterSpace ParameterSpace::cube(int d, double lo, double hi, double eig_min, double eig_max, ScaleMode mode) {
  if (d < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be positive");
  return ParameterSpace(Vector::Constant(d, lo), Vector::Constant(d, hi), eig_min, eig_max, mode);
}

double ParameterSpace::diameter() const noexcept {
  double diam = (upper_ - lower_).norm();
  if (mode_ == ScaleMode::Free) {
    diam += (eig_max_ - eig_min_) * std::sqrt(static_cast<double>(dimension()));
  }
  return diam;
}

double ParameterSpace::delta() const noexcept { return std::max(1.0, diameter()); }

bool ParameterSpace::contains(const Atom& atom) const {
  if (atom.dimension() != dimension()) return false;
  for (int i = 0; i < dimension(); ++i) {
    if (atom.mean[i] < lower_[i] || atom.mean[i] > upper_[i]) return false;
  }
  if (atom.covariance) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*atom.covariance, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) return false;
    const Vector& ev = eig.eigenvalues();
    if (ev.minCoeff() < eig_min_ || ev.maxCoeff() > eig_max_) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Atom

Atom::Atom(Vector mu) : mean(std::move(mu)) {
  if (mean.size() == 0 || !mean.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "atom mean must be a nonempty finite vector");
  }
}

Atom::Atom(Vector mu, Matrix cov) : Atom(std::move(mu)) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw Error(ErrorKind::DimensionMismatch, "covariance must be d x d");
  }
  if (!cov.allFinite()) throw Error(ErrorKind::InvalidCovariance, "covariance has non-finite entries");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw Error(ErrorKind::InvalidCovariance, "covariance is not symmetric");
  }
  covariance = std::move(cov);
}

// ---------------------------------------------------------------------------
// MixingMeasure

MixingMeasure::MixingMeasure(std::vector<Atom> atoms, std::vector<double> weights,
                             std::optional<Matrix> shared_covariance, bool exact_order)
    : shared_(std::move(shared_covariance)), exact_order_(exact_order) {
  if (atoms.empty()) throw Error(ErrorKind::InvalidArgument, "mixing measure needs at least one atom");
  if (atoms.size() != weights.size()) {
    throw Error(ErrorKind::DimensionMismatch, "atom count " + std::to_string(atoms.size()) +
                                                  " != weight count " + std::to_string(weights.size()));
  }
  const int d = atoms.front().dimension();
  const bool with_cov = atoms.front().covariance.has_value();
  for (const Atom& a : atoms) {
    if (a.dimension() != d) throw Error(ErrorKind::DimensionMismatch, "atoms have differing dimensions");
    if (a.covariance.has_value() != with_cov) {
      throw Error(ErrorKind::InvalidArgument, "either all atoms carry covariances or none does");
    }
  }
  if (shared_) {
    if (with_cov) throw Error(ErrorKind::InvalidArgument, "shared covariance given alongside per-atom covariances");
    // Reuse the Atom validation for shape and symmetry.
    Atom probe(Vector::Zero(d), *shared_);
    (void)probe;
  }

  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0 || w > 1.0 + kSumTol) {
      throw Error(ErrorKind::InvalidWeights, "weights must lie in [0, 1]");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > kSumReject) {
    throw Error(ErrorKind::InvalidWeights, "weights sum to " + std::to_string(total) + ", not 1");
  }

  double kept = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (weights[j] < kDropWeight) continue;
    atoms_.push_back(std::move(atoms[j]));
    weights_.push_back(weights[j]);
    kept += weights[j];
  }
  if (atoms_.empty()) throw Error(ErrorKind::InvalidWeights, "all weights are below the drop threshold");
  if (std::abs(kept - 1.0) > kSumTol) {
    for (double& w : weights_) w /= kept;
  }

  if (exact_order_) {
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      for (std::size_t j = i + 1; j < atoms_.size(); ++j) {
        double gap = (atoms_[i].mean - atoms_[j].mean).norm();
        if (with_cov) gap += (*atoms_[i].covariance - *atoms_[j].covariance).norm();
        if (!(gap > 0.0)) {
          throw Error(ErrorKind::InvalidArgument,
                      "exact-order measure has coincident atoms " + std::to_string(i) + " and " + std::to_string(j));
        }
      }
    }
  }
}

const Matrix& MixingMeasure::covariance(int j) const {
  const Atom& a = atom(j);
  if (a.covariance) return *a.covariance;
  if (shared_) return *shared_;
  throw Error(ErrorKind::MissingCovariance, "measure has neither per-atom nor shared covariances");
}

void MixingMeasure::check_in(const ParameterSpace& space) const {
  for (int j = 0; j < order(); ++j) {
    if (!space.contains(atom(j))) {
      throw Error(ErrorKind::OutOfSpace, "atom " + std::to_string(j) + " lies outside the parameter space");
    }
  }
}

MixingMeasure MixingMeasure::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != order()) throw Error(ErrorKind::DimensionMismatch, "permutation size");
  std::vector<Atom> atoms;
  std::vector<double> weights;
  atoms.reserve(perm.size());
  weights.reserve(perm.size());
  for (int p : perm) {
    atoms.push_back(atom(p));
    weights.push_back(weight(p));
  }
  return MixingMeasure(std::move(atoms), std::move(weights), shared_, exact_order_);
}

// ---------------------------------------------------------------------------
// Distances and Voronoi cells

double atom_distance(const Atom& a, const Atom& b, MetricKind metric) {
  if (a.dimension() != b.dimension()) throw Error(ErrorKind::DimensionMismatch, "atom dimensions differ");
  ++g_distance_evaluations;
  double dist = (a.mean - b.mean).norm();
  if (metric == MetricKind::Composite) {
    if (!a.covariance || !b.covariance) {
      throw Error(ErrorKind::MetricMismatch, "composite metric needs per-atom covariances");
    }
    dist += (*a.covariance - *b.covariance).norm();
  }
  return dist;
}

DistanceParts atom_distance_parts(const Atom& a, const Atom& b) {
  if (a.dimension() != b.dimension()) throw Error(ErrorKind::DimensionMismatch, "atom dimensions differ");
  if (!a.covariance || !b.covariance) {
    throw Error(ErrorKind::MetricMismatch, "covariance distance needs per-atom covariances");
  }
  ++g_distance_evaluations;
  return {(a.mean - b.mean).norm(), (*a.covariance - *b.covariance).norm()};
}

std::uint64_t distance_evaluation_count() noexcept { return g_distance_evaluations; }
void reset_distance_evaluation_count() noexcept { g_distance_evaluations = 0; }

VoronoiPartition voronoi_cells(const MixingMeasure& g, const MixingMeasure& reference, MetricKind metric) {
  if (g.dimension() != reference.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "measures live in different dimensions");
  }
  if (metric == MetricKind::Composite && (!g.has_atom_covariances() || !reference.has_atom_covariances())) {
    throw Error(ErrorKind::MetricMismatch, "composite metric needs per-atom covariances on both measures");
  }
  VoronoiPartition part;
  part.metric = metric;
  part.cells.assign(static_cast<std::size_t>(reference.order()), {});
  part.assignment.resize(static_cast<std::size_t>(g.order()));
  part.distance.resize(static_cast<std::size_t>(g.order()));
  for (int i = 0; i < g.order(); ++i) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int j = 0; j < reference.order(); ++j) {
      const double dist = atom_distance(g.atom(i), reference.atom(j), metric);
      if (dist < best_dist) {  // strict: ties keep the smaller index
        best = j;
        best_dist = dist;
      }
    }
    part.assignment[static_cast<std::size_t>(i)] = best;
    part.distance[static_cast<std::size_t>(i)] = best_dist;
    part.cells[static_cast<std::size_t>(best)].push_back(i);
  }
  return part;
}

// ---------------------------------------------------------------------------
// Densities

MixtureEvaluator::MixtureEvaluator(const MixingMeasure& g) : dim_(g.dimension()) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  means_.reserve(static_cast<std::size_t>(g.order()));
  chol_.reserve(static_cast<std::size_t>(g.order()));
  log_norm_.reserve(static_cast<std::size_t>(g.order()));
  for (int j = 0; j < g.order(); ++j) {
    const Matrix& cov = g.covariance(j);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::SingularCovariance, "Cholesky factorization failed for component " + std::to_string(j));
    }
    Matrix lower = llt.matrixL();
    double log_det_l = 0.0;
    for (int i = 0; i < dim_; ++i) {
      if (!(lower(i, i) > 0.0)) {
        throw Error(ErrorKind::SingularCovariance, "non-positive Cholesky pivot in component " + std::to_string(j));
      }
      log_det_l += std::log(lower(i, i));
    }
    means_.push_back(g.atom(j).mean);
    chol_.push_back(std::move(lower));
    log_norm_.push_back(std::log(g.weight(j)) - dim_ * half_log_2pi - log_det_l);
  }
}

void MixtureEvaluator::log_terms(Eigen::Ref<const Vector> x, std::span<double> out) const {
  if (x.size() != dim_) throw Error(ErrorKind::DimensionMismatch, "observation has wrong dimension");
  double stack[kStackDim];
  std::vector<double> heap;
  double* z = stack;
  if (dim_ > kStackDim) {
    heap.resize(static_cast<std::size_t>(dim_));
    z = heap.data();
  }
  for (std::size_t j = 0; j < means_.size(); ++j) {
    const Matrix& l = chol_[j];
    const Vector& mu = means_[j];
    // Forward substitution: z = L^{-1} (x - mu).
    double quad = 0.0;
    for (int r = 0; r < dim_; ++r) {
      double acc = x[r] - mu[r];
      for (int c = 0; c < r; ++c) acc -= l(r, c) * z[c];
      z[r] = acc / l(r, r);
      quad += z[r] * z[r];
    }
    out[j] = log_norm_[j] - 0.5 * quad;
  }
}

double MixtureEvaluator::log_density(Eigen::Ref<const Vector> x) const {
  std::vector<double> terms(means_.size());
  log_terms(x, terms);
  return log_sum_exp(terms);
}

double log_sum_exp(std::span<const double> values) noexcept {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double log_density(const MixingMeasure& g, const Vector& x) { return MixtureEvaluator(g).log_density(x); }

double density(const MixingMeasure& g, const Vector& x) { return std::exp(log_density(g, x)); }

DataMatrix sample(const MixingMeasure& g, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample size must be positive");
  const int d = g.dimension();
  std::vector<Matrix> factors;
  factors.reserve(static_cast<std::size_t>(g.order()));
  for (int j = 0; j < g.order(); ++j) {
    Eigen::LLT<Matrix> llt(g.covariance(j));
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::SingularCovariance, "Cholesky factorization failed for component " + std::to_string(j));
    }
    factors.emplace_back(llt.matrixL());
  }
  std::vector<double> cumulative(g.weights().size());
  std::partial_sum(g.weights().begin(), g.weights().end(), cumulative.begin());

  Rng rng(seed);
  DataMatrix out(n, d);
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const int comp = std::min(static_cast<int>(it - cumulative.begin()), g.order() - 1);
    for (int c = 0; c < d; ++c) z[c] = rng.normal();
    out.row(i) = (g.atom(comp).mean + factors[static_cast<std::size_t>(comp)] * z).transpose();
  }
  return out;
}

}  // namespace mixrates
