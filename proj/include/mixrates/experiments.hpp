#pragma once

#include "mixrates/em.hpp"
#include "mixrates/measure.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mixrates {

enum class ModelName { A, B, C };
enum class LossKind { D, DBar, WTilde };

std::string_view model_label(ModelName name) noexcept;
/// Throws UnsupportedModel.
ModelName parse_model(std::string_view label);
/// "D", "Dbar" or "Wtilde", as written to the records CSV.
std::string_view loss_label(LossKind loss) noexcept;

/// Simulation model definition.
///
///  A: d = 2, k0 = 2, known covariance 0.01 I, loss D.
///  B: d = 2, k0 = 3, free covariances, loss Dbar.
///  C: d = 1, k0 in {3, 4}, known variance 0.01, atoms drifting with n
///     toward G* = 1/2 delta_0 + 1/2 delta_0.2, loss Wtilde anchored at G*.
struct ModelSpec {
  ModelName name;
  int k0;
  int d;
  ScaleMode scale_mode;
  int k;
  LossKind loss;
  std::optional<MixingMeasure> g_star;
  std::optional<Matrix> fixed_covariance;
};

struct Model {
  MixingMeasure truth;
  ModelSpec spec;
};

int default_k0(ModelName name) noexcept;
/// eps_n = n^(-1/(4 k0 - 6)).
double model_c_epsilon(int k0, double n);
/// Throws UnsupportedModel for an unknown (name, k0) pair or k < k0.
Model build_model(ModelName name, int k0, int k, int n);
/// The fitted orders studied per model: A with k in {3, 4}, B with k in {4, 5},
/// C with k = k0 in {3, 4}. Throws UnsupportedModel otherwise.
void check_reproducible(ModelName name, int k, int k0);

/// Loss between a fitted and the true measure under the model's loss.
double model_loss(const ModelSpec& spec, const MixingMeasure& fitted, const MixingMeasure& truth);

struct ExperimentConfig {
  ModelName model = ModelName::A;
  int k = 3;
  int k0 = 2;
  std::vector<int> n_grid;
  int replicates = 1;
  std::uint64_t base_seed = 0;
  /// Iteration controls for the fits; k, xi, scale mode and init are set per replicate.
  EmConfig em;
  double jitter_scale = 0.01;
  int threads = 1;
  /// When false, wall_ms is written as 0 so output is byte-reproducible.
  bool record_timing = false;

  void validate() const;
};

/// count integers log-spaced over [lo, hi], rounded; duplicates removed.
std::vector<int> log_spaced_grid(int lo, int hi, int count);
/// 10 log-spaced sizes in [1e2, 1e4], 10 replicates.
ExperimentConfig desk_config(ModelName model, int k, int k0, std::uint64_t seed);
/// 100 log-spaced sizes in [1e2, 1e5], 20 replicates.
ExperimentConfig paper_config(ModelName model, int k, int k0, std::uint64_t seed);

struct ExperimentRecord {
  std::string model;
  int k = 0;
  int k0 = 0;
  int n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string loss_name;
  double loss_value = 0.0;
  int em_iters = 0;
  bool converged = false;
  double wall_ms = 0.0;
};

/// Seed of replicate r at grid position i: base_seed + i * replicates + r.
std::uint64_t replicate_seed(const ExperimentConfig& cfg, int grid_index, int replicate);

/// One (n, replicate) outcome: sample from the model at n, fit the penalized
/// MLE with xi = log n from a favorable start, evaluate the model loss. A
/// failure yields converged = false and a NaN loss.
ExperimentRecord run_replicate(const ExperimentConfig& cfg, int n, int replicate, std::uint64_t seed);

/// All replicates, ordered by (n, replicate) whatever the thread count.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg);

struct SampleSizeStats {
  int n;
  int count;
  double mean;
  /// Sample standard deviation (0 for a single record).
  double sd;
};

struct SlopeFit {
  double slope;
  double intercept;
  double slope_se;
  std::vector<SampleSizeStats> per_n;
  /// Records left out because they did not converge or have no finite loss.
  int excluded;
};

/// Least squares of log(mean loss) on log n over converged records.
/// Throws InsufficientData with fewer than two usable sample sizes.
SlopeFit fit_slope(std::span<const ExperimentRecord> records);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mixrates
