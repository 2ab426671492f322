#include "mixrates/em.hpp"

#include "mixrates/error.hpp"
#include "mixrates/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mixrates {

namespace {

// Components whose responsibility mass falls below this keep their previous parameters.
constexpr double kEmptyComponent = 1e-300;

struct StepOutput {
  MixingMeasure next;
  double log_likelihood;  // of the input measure
};

void check_data(const DataMatrix& data, const MixingMeasure& g) {
  if (data.rows() == 0) throw Error(ErrorKind::DegenerateData, "data set is empty");
  if (data.cols() != g.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "data has " + std::to_string(data.cols()) + " columns, measure has dimension " +
                                                  std::to_string(g.dimension()));
  }
}

// E-step into `resp` (n x k); returns sum_i log p_G(X_i).
double expectation(const MixingMeasure& g, const DataMatrix& data, Matrix& resp) {
  const MixtureEvaluator eval(g);
  const int n = static_cast<int>(data.rows());
  const int k = g.order();
  resp.resize(n, k);
  std::vector<double> terms(static_cast<std::size_t>(k));
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    eval.log_terms(data.row(i).transpose(), terms);
    const double lse = log_sum_exp(terms);
    ll += lse;
    for (int j = 0; j < k; ++j) resp(i, j) = std::exp(terms[static_cast<std::size_t>(j)] - lse);
  }
  return ll;
}

StepOutput step(const MixingMeasure& g, const DataMatrix& data, const EmConfig& cfg, Matrix& resp) {
  check_data(data, g);
  const int n = static_cast<int>(data.rows());
  const int k = g.order();
  if (k > cfg.k) {
    throw Error(ErrorKind::InvalidArgument, "measure order " + std::to_string(k) + " exceeds k = " + std::to_string(cfg.k));
  }
  const bool free_scale = cfg.scale_mode == ScaleMode::Free;
  if (free_scale && !g.has_atom_covariances()) {
    throw Error(ErrorKind::MissingCovariance, "free scale mode needs per-atom covariances");
  }
  const double xi = cfg.xi_for(n);

  const double ll = expectation(g, data, resp);
  const Vector mass = resp.colwise().sum().transpose();

  std::vector<Atom> atoms;
  std::vector<double> weights;
  atoms.reserve(static_cast<std::size_t>(k));
  weights.reserve(static_cast<std::size_t>(k));
  const double denom = n + k * xi;
  for (int j = 0; j < k; ++j) {
    weights.push_back((mass[j] + xi) / denom);
    const Atom& old = g.atom(j);
    if (!(mass[j] > kEmptyComponent)) {
      atoms.push_back(old);
      continue;
    }
    const Vector mean = (data.transpose() * resp.col(j)) / mass[j];
    if (!free_scale) {
      atoms.emplace_back(mean);
      continue;
    }
    const Vector& center = cfg.stale_mean_covariance ? old.mean : mean;
    const Matrix centered = data.rowwise() - center.transpose();
    const Matrix weighted = centered.array().colwise() * resp.col(j).array();
    Matrix scatter = centered.transpose() * weighted;
    scatter /= mass[j];
    atoms.emplace_back(mean, floor_eigenvalues(scatter, cfg.covariance_floor));
  }
  return {MixingMeasure(std::move(atoms), std::move(weights), free_scale ? std::nullopt : g.shared_covariance()), ll};
}

double penalty(const MixingMeasure& g) {
  double rho = 0.0;
  for (double w : g.weights()) {
    if (!(w > 0.0)) throw Error(ErrorKind::NonpositiveWeight, "penalty is -infinity for a zero weight");
    rho += std::log(w);
  }
  return rho;
}

// Uniform surjection of {0..k-1} onto {0..groups-1}, by rejection.
std::vector<int> random_groups(int k, int groups, Rng& rng) {
  std::vector<int> label(static_cast<std::size_t>(k));
  while (true) {
    std::vector<bool> hit(static_cast<std::size_t>(groups), false);
    for (int j = 0; j < k; ++j) {
      label[static_cast<std::size_t>(j)] = static_cast<int>(rng.index(static_cast<std::uint64_t>(groups)));
      hit[static_cast<std::size_t>(label[static_cast<std::size_t>(j)])] = true;
    }
    if (std::all_of(hit.begin(), hit.end(), [](bool b) { return b; })) return label;
  }
}

std::optional<Matrix> fixed_kernel(const EmConfig& cfg, const MixingMeasure* hint) {
  if (cfg.fixed_covariance) return cfg.fixed_covariance;
  if (hint != nullptr && hint->shared_covariance()) return hint->shared_covariance();
  throw Error(ErrorKind::MissingCovariance, "fixed scale mode needs a kernel covariance");
}

MixingMeasure favorable_start(const FavorableInit& init, const EmConfig& cfg, std::uint64_t seed) {
  const MixingMeasure& truth = init.truth;
  const int k0 = truth.order();
  if (k0 > cfg.k) throw Error(ErrorKind::InvalidArgument, "favorable start needs k >= k0");
  Rng rng(seed, 1);
  const std::vector<int> group = random_groups(cfg.k, k0, rng);
  const int d = truth.dimension();
  std::vector<Atom> atoms;
  for (int j = 0; j < cfg.k; ++j) {
    const int src = group[static_cast<std::size_t>(j)];
    Vector mean = truth.atom(src).mean;
    for (int c = 0; c < d; ++c) mean[c] += init.jitter_scale * rng.normal();
    if (cfg.scale_mode == ScaleMode::Fixed) {
      atoms.emplace_back(std::move(mean));
      continue;
    }
    Matrix noise(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) noise(r, c) = rng.normal();
    }
    const Matrix cov = truth.covariance(src) + init.jitter_scale * 0.5 * (noise + noise.transpose());
    atoms.emplace_back(std::move(mean), floor_eigenvalues(cov, cfg.covariance_floor));
  }
  std::vector<double> weights(static_cast<std::size_t>(cfg.k), 1.0 / cfg.k);
  std::optional<Matrix> shared;
  if (cfg.scale_mode == ScaleMode::Fixed) shared = fixed_kernel(cfg, &truth);
  return MixingMeasure(std::move(atoms), std::move(weights), std::move(shared));
}

MixingMeasure random_box_start(const DataMatrix& data, const RandomBoxInit& init, const EmConfig& cfg,
                               std::uint64_t seed) {
  Rng rng(init.seed.value_or(seed), 1);
  const int d = static_cast<int>(data.cols());
  const Vector lo = data.colwise().minCoeff().transpose();
  const Vector hi = data.colwise().maxCoeff().transpose();
  const Vector mean = data.colwise().mean().transpose();
  Vector var(d);
  for (int c = 0; c < d; ++c) var[c] = (data.col(c).array() - mean[c]).square().mean();
  const Matrix start_cov = floor_eigenvalues(var.asDiagonal().toDenseMatrix(), cfg.covariance_floor);

  std::vector<Atom> atoms;
  for (int j = 0; j < cfg.k; ++j) {
    Vector mu(d);
    for (int c = 0; c < d; ++c) mu[c] = rng.uniform(lo[c], hi[c]);
    if (cfg.scale_mode == ScaleMode::Fixed) {
      atoms.emplace_back(std::move(mu));
    } else {
      atoms.emplace_back(std::move(mu), start_cov);
    }
  }
  std::vector<double> weights(static_cast<std::size_t>(cfg.k), 1.0 / cfg.k);
  std::optional<Matrix> shared;
  if (cfg.scale_mode == ScaleMode::Fixed) shared = fixed_kernel(cfg, nullptr);
  return MixingMeasure(std::move(atoms), std::move(weights), std::move(shared));
}

MixingMeasure measure_start(const FromMeasureInit& init, const EmConfig& cfg) {
  const MixingMeasure& g = init.start;
  if (g.order() != cfg.k) throw Error(ErrorKind::InvalidArgument, "initial measure must have order k");
  if (cfg.scale_mode == ScaleMode::Free) {
    if (!g.has_atom_covariances()) throw Error(ErrorKind::MissingCovariance, "free scale mode needs per-atom covariances");
    return g;
  }
  if (g.has_atom_covariances()) throw Error(ErrorKind::InvalidArgument, "fixed scale mode takes location-only atoms");
  return MixingMeasure(g.atoms(), g.weights(), fixed_kernel(cfg, &g));
}

}  // namespace

void EmConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
  if (xi && !(*xi >= 0.0)) throw Error(ErrorKind::InvalidArgument, "xi must be >= 0");
  if (!(covariance_floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "covariance floor must be > 0");
  if (const auto* fav = std::get_if<FavorableInit>(&init); fav && !(fav->jitter_scale > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "jitter scale must be > 0");
  }
}

double EmConfig::xi_for(int n) const { return xi.value_or(std::log(static_cast<double>(n))); }

Matrix floor_eigenvalues(const Matrix& cov, double floor) {
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Vector clamped = eig.eigenvalues().cwiseMax(floor);
  const Matrix rebuilt = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (rebuilt + rebuilt.transpose());
}

double penalized_objective(const MixingMeasure& g, const DataMatrix& data, double xi) {
  const double rho = penalty(g);
  check_data(data, g);
  const MixtureEvaluator eval(g);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) ll += eval.log_density(data.row(i).transpose());
  return ll + xi * rho;
}

Matrix responsibilities(const MixingMeasure& g, const DataMatrix& data) {
  check_data(data, g);
  Matrix resp;
  expectation(g, data, resp);
  return resp;
}

MixingMeasure em_step(const MixingMeasure& current, const DataMatrix& data, const EmConfig& cfg) {
  cfg.validate();
  Matrix resp;
  return step(current, data, cfg, resp).next;
}

double parameter_distance(const MixingMeasure& a, const MixingMeasure& b) {
  if (a.order() != b.order() || a.dimension() != b.dimension()) return std::numeric_limits<double>::infinity();
  double sq = 0.0;
  for (int j = 0; j < a.order(); ++j) {
    const double dw = a.weight(j) - b.weight(j);
    sq += dw * dw + (a.atom(j).mean - b.atom(j).mean).squaredNorm();
    if (a.has_atom_covariances() && b.has_atom_covariances()) {
      sq += (*a.atom(j).covariance - *b.atom(j).covariance).squaredNorm();
    }
  }
  return std::sqrt(sq);
}

MixingMeasure initial_measure(const DataMatrix& data, const EmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const MixingMeasure start = std::visit(
      [&](const auto& init) -> MixingMeasure {
        using T = std::decay_t<decltype(init)>;
        if constexpr (std::is_same_v<T, FavorableInit>) {
          return favorable_start(init, cfg, seed);
        } else if constexpr (std::is_same_v<T, RandomBoxInit>) {
          return random_box_start(data, init, cfg, seed);
        } else {
          return measure_start(init, cfg);
        }
      },
      cfg.init);
  if (start.dimension() != data.cols()) throw Error(ErrorKind::DimensionMismatch, "initial measure dimension");
  return start;
}

FitResult fit(const DataMatrix& data, const EmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (data.rows() < cfg.k) throw Error(ErrorKind::DegenerateData, "n < k");
  const double xi = cfg.xi_for(static_cast<int>(data.rows()));

  MixingMeasure current = initial_measure(data, cfg, seed);
  FitResult result{current, 0, {}, false, std::nullopt};
  result.objective_trace.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  Matrix resp;
  for (int t = 0; t < cfg.max_iters; ++t) {
    StepOutput out = step(current, data, cfg, resp);
    result.objective_trace.push_back(out.log_likelihood + xi * penalty(current));
    const double change = parameter_distance(current, out.next);
    current = std::move(out.next);
    ++result.iterations;
    if (change <= cfg.tol) {
      result.converged = true;
      break;
    }
  }
  result.objective_trace.push_back(penalized_objective(current, data, xi));
  if (cfg.keep_responsibilities) result.responsibilities = responsibilities(current, data);
  result.measure = std::move(current);
  return result;
}

}  // namespace mixrates
