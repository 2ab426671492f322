#include "mixrates/experiments.hpp"

#include "mixrates/error.hpp"
#include "mixrates/losses.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

namespace mixrates {

namespace {

Vector vec2(double x, double y) { return Vector{{x, y}}; }

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Model model_a(int k) {
  const Matrix cov = 0.01 * Matrix::Identity(2, 2);
  MixingMeasure truth({Atom(vec2(0.0, 0.0)), Atom(vec2(0.2, 0.2))}, {0.5, 0.5}, cov, true);
  ModelSpec spec{ModelName::A, 2, 2, ScaleMode::Fixed, k, LossKind::D, std::nullopt, cov};
  return {std::move(truth), std::move(spec)};
}

Model model_b(int k) {
  // Printed proportions (1/3, 1/4, 1/3) sum to 11/12; renormalized.
  const double total = 1.0 / 3 + 1.0 / 4 + 1.0 / 3;
  MixingMeasure truth({Atom(vec2(0.0, 0.3), mat2(0.042824, 0.017324, 0.017324, 0.081759)),
                       Atom(vec2(0.1, -0.4), mat2(0.0175, -0.0125, -0.0125, 0.0175)),
                       Atom(vec2(0.5, 0.2), mat2(0.01, -0.0125, -0.0125, 0.0175))},
                      {(1.0 / 3) / total, (1.0 / 4) / total, (1.0 / 3) / total}, std::nullopt, true);
  ModelSpec spec{ModelName::B, 3, 2, ScaleMode::Free, k, LossKind::DBar, std::nullopt, std::nullopt};
  return {std::move(truth), std::move(spec)};
}

Model model_c(int k0, int k, int n) {
  const double eps = model_c_epsilon(k0, n);
  std::vector<double> means{0.0, 0.2 + eps, 0.2 + 4.0 * eps};
  if (k0 == 4) means.push_back(0.2 - 1.5 * eps);
  std::vector<Atom> atoms;
  for (double m : means) atoms.emplace_back(Vector::Constant(1, m));
  const Matrix cov = Matrix::Constant(1, 1, 0.01);
  MixingMeasure truth(std::move(atoms), std::vector<double>(means.size(), 1.0 / k0), cov, true);
  MixingMeasure g_star({Atom(Vector::Constant(1, 0.0)), Atom(Vector::Constant(1, 0.2))}, {0.5, 0.5}, std::nullopt,
                       true);
  ModelSpec spec{ModelName::C, k0, 1, ScaleMode::Fixed, k, LossKind::WTilde, std::move(g_star), cov};
  return {std::move(truth), std::move(spec)};
}

}  // namespace

std::string_view model_label(ModelName name) noexcept {
  switch (name) {
    case ModelName::A: return "A";
    case ModelName::B: return "B";
    case ModelName::C: return "C";
  }
  return "?";
}

ModelName parse_model(std::string_view label) {
  if (label == "A" || label == "a") return ModelName::A;
  if (label == "B" || label == "b") return ModelName::B;
  if (label == "C" || label == "c") return ModelName::C;
  throw Error(ErrorKind::UnsupportedModel, "unknown model '" + std::string(label) + "'");
}

std::string_view loss_label(LossKind loss) noexcept {
  switch (loss) {
    case LossKind::D: return "D";
    case LossKind::DBar: return "Dbar";
    case LossKind::WTilde: return "Wtilde";
  }
  return "?";
}

int default_k0(ModelName name) noexcept {
  switch (name) {
    case ModelName::A: return 2;
    case ModelName::B: return 3;
    case ModelName::C: return 3;
  }
  return 0;
}

double model_c_epsilon(int k0, double n) { return std::pow(n, -1.0 / (4.0 * k0 - 6.0)); }

Model build_model(ModelName name, int k0, int k, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample size must be positive");
  const bool known = (name == ModelName::A && k0 == 2) || (name == ModelName::B && k0 == 3) ||
                     (name == ModelName::C && (k0 == 3 || k0 == 4));
  if (!known) {
    throw Error(ErrorKind::UnsupportedModel,
                "model " + std::string(model_label(name)) + " with k0 = " + std::to_string(k0) + " is not defined");
  }
  if (k < k0) throw Error(ErrorKind::UnsupportedModel, "fitted order k must be >= k0");
  switch (name) {
    case ModelName::A: return model_a(k);
    case ModelName::B: return model_b(k);
    case ModelName::C: return model_c(k0, k, n);
  }
  throw Error(ErrorKind::UnsupportedModel, "unknown model");
}

void check_reproducible(ModelName name, int k, int k0) {
  bool ok = false;
  switch (name) {
    case ModelName::A: ok = k0 == 2 && (k == 3 || k == 4); break;
    case ModelName::B: ok = k0 == 3 && (k == 4 || k == 5); break;
    case ModelName::C: ok = k == k0 && (k0 == 3 || k0 == 4); break;
  }
  if (!ok) {
    throw Error(ErrorKind::UnsupportedModel, "model " + std::string(model_label(name)) + " does not support k = " +
                                                 std::to_string(k) + ", k0 = " + std::to_string(k0));
  }
}

double model_loss(const ModelSpec& spec, const MixingMeasure& fitted, const MixingMeasure& truth) {
  switch (spec.loss) {
    case LossKind::D: return loss_d(fitted, truth);
    case LossKind::DBar: return loss_dbar(fitted, truth);
    case LossKind::WTilde: return loss_wtilde(fitted, truth, *spec.g_star);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown loss");
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw Error(ErrorKind::InvalidArgument, "n grid is empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw Error(ErrorKind::InvalidArgument, "sample sizes must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw Error(ErrorKind::InvalidArgument, "n grid must be strictly increasing");
  }
  if (replicates < 1) throw Error(ErrorKind::InvalidArgument, "replicates must be >= 1");
  if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
  (void)build_model(model, k0, k, n_grid.front());
}

std::vector<int> log_spaced_grid(int lo, int hi, int count) {
  if (lo < 1 || hi < lo || count < 1) throw Error(ErrorKind::InvalidArgument, "invalid grid bounds");
  std::vector<int> grid;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    const double value = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    const int n = static_cast<int>(std::lround(value));
    if (grid.empty() || n > grid.back()) grid.push_back(n);
  }
  return grid;
}

ExperimentConfig desk_config(ModelName model, int k, int k0, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.model = model;
  cfg.k = k;
  cfg.k0 = k0;
  cfg.n_grid = log_spaced_grid(100, 10000, 10);
  cfg.replicates = 10;
  cfg.base_seed = seed;
  return cfg;
}

ExperimentConfig paper_config(ModelName model, int k, int k0, std::uint64_t seed) {
  ExperimentConfig cfg = desk_config(model, k, k0, seed);
  cfg.n_grid = log_spaced_grid(100, 100000, 100);
  cfg.replicates = 20;
  return cfg;
}

std::uint64_t replicate_seed(const ExperimentConfig& cfg, int grid_index, int replicate) {
  return cfg.base_seed + static_cast<std::uint64_t>(grid_index) * static_cast<std::uint64_t>(cfg.replicates) +
         static_cast<std::uint64_t>(replicate);
}

ExperimentRecord run_replicate(const ExperimentConfig& cfg, int n, int replicate, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const Model model = build_model(cfg.model, cfg.k0, cfg.k, n);
  ExperimentRecord rec;
  rec.model = std::string(model_label(cfg.model));
  rec.k = cfg.k;
  rec.k0 = cfg.k0;
  rec.n = n;
  rec.replicate = replicate;
  rec.seed = seed;
  rec.loss_name = std::string(loss_label(model.spec.loss));
  try {
    const DataMatrix data = sample(model.truth, n, seed);
    EmConfig em = cfg.em;
    em.k = cfg.k;
    em.xi = std::log(static_cast<double>(n));
    em.scale_mode = model.spec.scale_mode;
    em.fixed_covariance = model.spec.fixed_covariance;
    em.init = FavorableInit{model.truth, cfg.jitter_scale};
    em.keep_responsibilities = false;
    const FitResult result = fit(data, em, seed);
    rec.em_iters = result.iterations;
    rec.converged = result.converged;
    rec.loss_value = model_loss(model.spec, result.measure, model.truth);
  } catch (const std::exception&) {
    rec.converged = false;
    rec.loss_value = std::numeric_limits<double>::quiet_NaN();
  }
  if (cfg.record_timing) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Task {
    int grid_index;
    int replicate;
  };
  std::vector<Task> tasks;
  for (int i = 0; i < static_cast<int>(cfg.n_grid.size()); ++i) {
    for (int r = 0; r < cfg.replicates; ++r) tasks.push_back({i, r});
  }
  std::vector<std::optional<ExperimentRecord>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const Task& task = tasks[t];
      slots[t] = run_replicate(cfg, cfg.n_grid[static_cast<std::size_t>(task.grid_index)], task.replicate,
                               replicate_seed(cfg, task.grid_index, task.replicate));
    }
  };
  const int workers = std::min<int>(cfg.threads, static_cast<int>(tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  std::vector<ExperimentRecord> records;
  records.reserve(tasks.size());
  for (auto& slot : slots) records.push_back(std::move(*slot));
  return records;
}

SlopeFit fit_slope(std::span<const ExperimentRecord> records) {
  std::map<int, std::vector<double>> by_n;
  int excluded = 0;
  for (const ExperimentRecord& rec : records) {
    if (!rec.converged || !std::isfinite(rec.loss_value)) {
      ++excluded;
      continue;
    }
    by_n[rec.n].push_back(rec.loss_value);
  }
  if (by_n.size() < 2) {
    throw Error(ErrorKind::InsufficientData, "need converged records at two or more distinct sample sizes");
  }
  SlopeFit out{};
  out.excluded = excluded;
  std::vector<double> xs, ys;
  for (const auto& [n, losses] : by_n) {
    const double count = static_cast<double>(losses.size());
    const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / count;
    double ss = 0.0;
    for (double v : losses) ss += (v - mean) * (v - mean);
    const double sd = losses.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    if (!(mean > 0.0)) {
      throw Error(ErrorKind::InsufficientData, "mean loss at n = " + std::to_string(n) + " is zero; log undefined");
    }
    out.per_n.push_back({n, static_cast<int>(losses.size()), mean, sd});
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(mean));
  }
  const double m = static_cast<double>(xs.size());
  const double xbar = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
  const double ybar = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  out.slope = sxy / sxx;
  out.intercept = ybar - out.slope * xbar;
  if (xs.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double resid = ys[i] - (out.intercept + out.slope * xs[i]);
      ssr += resid * resid;
    }
    out.slope_se = std::sqrt(ssr / (m - 2.0) / sxx);
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "spearman needs paired samples");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double m = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / m;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / m;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mixrates
