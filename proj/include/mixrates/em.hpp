#pragma once

#include "mixrates/measure.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace mixrates {

/// Start near the true measure: the fitted indices {0..k-1} are split
/// uniformly at random into k0 nonempty groups, and each fitted atom starts at
/// its group's true parameters plus N(0, jitter_scale^2) noise.
struct FavorableInit {
  MixingMeasure truth;
  double jitter_scale = 0.01;
};

/// Means uniform over the data's bounding box; free covariances start at the
/// per-coordinate sample variances. Without a seed the fit seed is used.
struct RandomBoxInit {
  std::optional<std::uint64_t> seed;
};

struct FromMeasureInit {
  MixingMeasure start;
};

using InitStrategy = std::variant<RandomBoxInit, FavorableInit, FromMeasureInit>;

struct EmConfig {
  int k = 1;
  /// Penalty weight; unset means log n.
  std::optional<double> xi;
  int max_iters = 2000;
  /// Stop once the Euclidean norm of the parameter change is at most tol.
  double tol = 1e-8;
  ScaleMode scale_mode = ScaleMode::Free;
  /// Smallest eigenvalue allowed in a fitted covariance.
  double covariance_floor = 1e-6;
  InitStrategy init = RandomBoxInit{};
  /// Kernel covariance in fixed mode, when the initial measure does not carry one.
  std::optional<Matrix> fixed_covariance;
  /// Center the covariance update on the previous means instead of the new ones.
  bool stale_mean_covariance = false;
  bool keep_responsibilities = false;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
  double xi_for(int n) const;
};

struct FitResult {
  MixingMeasure measure;
  int iterations = 0;
  /// Penalized objective at the start and after every step.
  std::vector<double> objective_trace;
  bool converged = false;
  std::optional<Matrix> responsibilities;
};

/// sum_i log p_G(X_i) + xi * sum_j log p_j.
/// Throws NonpositiveWeight if some weight is not strictly positive.
double penalized_objective(const MixingMeasure& g, const DataMatrix& data, double xi);

/// Posterior component probabilities, n x k, computed in log space.
Matrix responsibilities(const MixingMeasure& g, const DataMatrix& data);

/// One penalized EM update. Weights become (n_j + xi) / (n + k xi); means
/// are responsibility-weighted averages; in free mode covariances are the
/// weighted scatter about the new means, with eigenvalues floored. Fixed
/// mode leaves the kernel covariance untouched.
MixingMeasure em_step(const MixingMeasure& current, const DataMatrix& data, const EmConfig& cfg);

/// Euclidean norm of the change in (weights, means, covariances). Infinite
/// if the orders differ.
double parameter_distance(const MixingMeasure& a, const MixingMeasure& b);

/// Starting measure for fit() under cfg.init.
MixingMeasure initial_measure(const DataMatrix& data, const EmConfig& cfg, std::uint64_t seed);

/// Runs em_step from the initial measure until the parameter change is at
/// most cfg.tol or cfg.max_iters steps were taken. Throws DegenerateData if n < k.
FitResult fit(const DataMatrix& data, const EmConfig& cfg, std::uint64_t seed);

/// Symmetrizes and raises every eigenvalue below floor to floor.
Matrix floor_eigenvalues(const Matrix& cov, double floor);

}  // namespace mixrates
