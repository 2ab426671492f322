#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mixrates {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// n x d observations, one row per sample.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Known-fixed covariance shared by all components, or free per-atom covariances.
enum class ScaleMode { Fixed, Free };

/// Distance between atoms: Euclidean on means, or mean distance plus the
/// Frobenius distance of covariances.
enum class MetricKind { MeanOnly, Composite };

struct Atom;

/// Compact parameter space: a box for means and an eigenvalue interval for covariances.
class ParameterSpace {
 public:
  ParameterSpace(Vector lower, Vector upper, double eig_min, double eig_max, ScaleMode mode);

  /// Box [lo, hi]^d.
  static ParameterSpace cube(int d, double lo, double hi, double eig_min, double eig_max, ScaleMode mode);

  int dimension() const noexcept { return static_cast<int>(lower_.size()); }
  const Vector& lower() const noexcept { return lower_; }
  const Vector& upper() const noexcept { return upper_; }
  double eig_min() const noexcept { return eig_min_; }
  double eig_max() const noexcept { return eig_max_; }
  ScaleMode scale_mode() const noexcept { return mode_; }

  /// Diameter under the mode's metric. In free mode the covariance part is
  /// (eig_max - eig_min) * sqrt(d), the largest Frobenius gap of two
  /// covariances with spectra in the interval.
  double diameter() const noexcept;
  /// max(1, diameter()).
  double delta() const noexcept;

  bool contains(const Atom& atom) const;

 private:
  Vector lower_;
  Vector upper_;
  double eig_min_;
  double eig_max_;
  ScaleMode mode_;
};

struct Atom {
  Vector mean;
  std::optional<Matrix> covariance;

  explicit Atom(Vector mu);
  /// Throws InvalidCovariance unless cov is square, finite and symmetric to 1e-12.
  Atom(Vector mu, Matrix cov);

  int dimension() const noexcept { return static_cast<int>(mean.size()); }
};

/// Finitely supported probability measure over atoms.
///
/// Weights below 1e-12 are dropped at construction and the rest renormalized.
/// Either every atom carries a covariance (free scale) or none does; in the
/// latter case an optional shared covariance describes the fixed-scale kernel.
class MixingMeasure {
 public:
  static constexpr double kDropWeight = 1e-12;

  MixingMeasure(std::vector<Atom> atoms, std::vector<double> weights,
                std::optional<Matrix> shared_covariance = std::nullopt, bool exact_order = false);

  int order() const noexcept { return static_cast<int>(atoms_.size()); }
  int dimension() const noexcept { return atoms_.front().dimension(); }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Atom& atom(int j) const { return atoms_.at(static_cast<std::size_t>(j)); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(int j) const { return weights_.at(static_cast<std::size_t>(j)); }

  const std::optional<Matrix>& shared_covariance() const noexcept { return shared_; }
  bool has_atom_covariances() const noexcept { return atoms_.front().covariance.has_value(); }
  /// Kernel covariance of component j: the atom's own, else the shared one.
  const Matrix& covariance(int j) const;

  bool exact_order() const noexcept { return exact_order_; }

  /// Throws OutOfSpace if any atom lies outside the space.
  void check_in(const ParameterSpace& space) const;

  /// Measure with atom perm[j] of this one at position j.
  MixingMeasure permuted(std::span<const int> perm) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> weights_;
  std::optional<Matrix> shared_;
  bool exact_order_;
};

// Atom distances. Every call counts as one distance evaluation on the calling
// thread; see distance_evaluation_count().

struct DistanceParts {
  double mean;
  double covariance;
};

double atom_distance(const Atom& a, const Atom& b, MetricKind metric);
/// Mean distance and Frobenius covariance distance; both atoms need covariances.
DistanceParts atom_distance_parts(const Atom& a, const Atom& b);

std::uint64_t distance_evaluation_count() noexcept;
void reset_distance_evaluation_count() noexcept;

struct VoronoiPartition {
  /// cells[j] lists the indices (ascending) of atoms assigned to reference atom j.
  std::vector<std::vector<int>> cells;
  /// assignment[i] is the cell of atom i.
  std::vector<int> assignment;
  /// Distance of atom i to its generator under `metric`.
  std::vector<double> distance;
  MetricKind metric;
};

/// Assigns each atom of g to its nearest atom of reference; ties go to the
/// smallest reference index.
VoronoiPartition voronoi_cells(const MixingMeasure& g, const MixingMeasure& reference, MetricKind metric);

/// Precomputed Cholesky factors for repeated density evaluation.
class MixtureEvaluator {
 public:
  /// Throws MissingCovariance or SingularCovariance.
  explicit MixtureEvaluator(const MixingMeasure& g);

  int order() const noexcept { return static_cast<int>(means_.size()); }
  int dimension() const noexcept { return dim_; }

  /// log(w_j) + log N(x; mu_j, Sigma_j) for every j, written to out.
  void log_terms(Eigen::Ref<const Vector> x, std::span<double> out) const;
  double log_density(Eigen::Ref<const Vector> x) const;

 private:
  int dim_;
  std::vector<Vector> means_;
  std::vector<Matrix> chol_;  // lower factors
  std::vector<double> log_norm_;  // log w_j - d/2 log 2pi - log det L_j
};

double log_sum_exp(std::span<const double> values) noexcept;

double log_density(const MixingMeasure& g, const Vector& x);
double density(const MixingMeasure& g, const Vector& x);

/// n i.i.d. draws from p_G. Component labels come from one uniform each,
/// followed by d inverse-CDF normals, so the output is a function of (g, n, seed).
DataMatrix sample(const MixingMeasure& g, int n, std::uint64_t seed);

}  // namespace mixrates
