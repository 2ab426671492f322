#include "mixrates/em.hpp"
#include "mixrates/error.hpp"
#include "mixrates/rng.hpp"
#include "oracles/textbook_em.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace mixrates;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

DataMatrix column(std::vector<double> xs) {
  DataMatrix data(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) data(static_cast<Eigen::Index>(i), 0) = xs[i];
  return data;
}

Atom scalar_gaussian(double mean, double var) { return Atom(Vector::Constant(1, mean), Matrix::Constant(1, 1, var)); }

std::vector<Eigen::VectorXd> rows_of(const DataMatrix& data) {
  std::vector<Eigen::VectorXd> out;
  for (Eigen::Index i = 0; i < data.rows(); ++i) out.push_back(data.row(i).transpose());
  return out;
}

oracle::GaussianMixture to_oracle(const MixingMeasure& g) {
  oracle::GaussianMixture m;
  m.weights = g.weights();
  for (int j = 0; j < g.order(); ++j) {
    m.means.push_back(g.atom(j).mean);
    m.covariances.push_back(g.covariance(j));
  }
  return m;
}

MixingMeasure two_blob_truth() {
  Matrix c1(2, 2), c2(2, 2);
  c1 << 0.02, 0.005, 0.005, 0.03;
  c2 << 0.04, -0.01, -0.01, 0.02;
  return MixingMeasure({Atom(Vector{{0.0, 0.0}}, c1), Atom(Vector{{0.5, 0.3}}, c2)}, {0.4, 0.6});
}

EmConfig favorable_config(const MixingMeasure& truth, int k, ScaleMode mode) {
  EmConfig cfg;
  cfg.k = k;
  cfg.scale_mode = mode;
  cfg.init = FavorableInit{truth, 0.05};
  return cfg;
}

}  // namespace

TEST_CASE("penalized weight update hand value") {
  // Six points at 0 and four at 100 give responsibility masses exactly 6 and 4.
  std::vector<double> xs(6, 0.0);
  xs.insert(xs.end(), 4, 100.0);
  const DataMatrix data = column(xs);
  const MixingMeasure g({scalar_gaussian(0.0, 1.0), scalar_gaussian(100.0, 1.0)}, {0.5, 0.5});
  EmConfig cfg;
  cfg.k = 2;
  const MixingMeasure next = em_step(g, data, cfg);
  const double expected = (6.0 + std::log(10.0)) / (10.0 + 2.0 * std::log(10.0));
  CHECK(next.weight(0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(next.weight(0) == doctest::Approx(0.56847).epsilon(1e-5));

  cfg.xi = 0.0;
  CHECK(em_step(g, data, cfg).weight(0) == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("unpenalized step equals a textbook EM step") {
  const MixingMeasure truth = two_blob_truth();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DataMatrix data = sample(truth, 200, seed);
    Rng rng(seed, 7);
    std::vector<Atom> atoms;
    for (int j = 0; j < 3; ++j) {
      Matrix cov = Matrix::Identity(2, 2) * rng.uniform(0.02, 0.1);
      atoms.emplace_back(Vector{{rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.3)}}, cov);
    }
    const MixingMeasure g(std::move(atoms), {0.2, 0.3, 0.5});
    EmConfig cfg;
    cfg.k = 3;
    cfg.xi = 0.0;
    const MixingMeasure ours = em_step(g, data, cfg);
    const oracle::GaussianMixture ref = oracle::em_step(to_oracle(g), rows_of(data));
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(ours.weight(j) - ref.weights[j]) <= 1e-12);
      CHECK((ours.atom(j).mean - ref.means[j]).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((ours.covariance(j) - ref.covariances[j]).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("stale-mean covariance variant") {
  const MixingMeasure truth = two_blob_truth();
  const DataMatrix data = sample(truth, 300, 4);
  const MixingMeasure g({Atom(Vector{{0.1, 0.1}}, 0.05 * Matrix::Identity(2, 2)),
                         Atom(Vector{{0.4, 0.2}}, 0.05 * Matrix::Identity(2, 2))},
                        {0.5, 0.5});
  EmConfig cfg;
  cfg.k = 2;
  cfg.xi = 0.0;
  cfg.stale_mean_covariance = true;
  const MixingMeasure stale = em_step(g, data, cfg);
  cfg.stale_mean_covariance = false;
  const MixingMeasure fresh = em_step(g, data, cfg);

  // Scatter about the old mean = scatter about the new mean + shift outer product.
  for (int j = 0; j < 2; ++j) {
    CHECK(stale.atom(j).mean.isApprox(fresh.atom(j).mean, 1e-14));
    const Vector shift = fresh.atom(j).mean - g.atom(j).mean;
    const Matrix expected = fresh.covariance(j) + shift * shift.transpose();
    CHECK((stale.covariance(j) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("responsibilities are density ratios") {
  const MixingMeasure g({scalar_gaussian(0.0, 1.0), scalar_gaussian(100.0, 1.0)}, {0.5, 0.5});
  const Matrix r = responsibilities(g, column({0.0, 50.0, 100.0}));
  CHECK(r(0, 0) >= 1.0 - 1e-12);
  CHECK(r(0, 1) <= 1e-12);
  CHECK(r(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r(2, 1) >= 1.0 - 1e-12);

  // Far from every component, log-space evaluation still normalizes.
  const Matrix far = responsibilities(g, column({1e4}));
  CHECK(std::isfinite(far(0, 0)));
  CHECK(far.row(0).sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(far(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("penalized objective") {
  const DataMatrix data = column({-0.3, 0.1, 0.4, 1.2, 2.0});
  const MixingMeasure g({scalar_gaussian(0.0, 0.5), scalar_gaussian(1.5, 0.2)}, {0.3, 0.7});
  double ll = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double x = data(i, 0);
    const double p = 0.3 * std::exp(-x * x / (2 * 0.5)) / std::sqrt(2 * std::numbers::pi * 0.5) +
                     0.7 * std::exp(-(x - 1.5) * (x - 1.5) / (2 * 0.2)) / std::sqrt(2 * std::numbers::pi * 0.2);
    ll += std::log(p);
  }
  CHECK(penalized_objective(g, data, 0.0) == doctest::Approx(ll).epsilon(1e-13));
  const double pen = std::log(0.3) + std::log(0.7);
  CHECK(penalized_objective(g, data, 2.5) == doctest::Approx(ll + 2.5 * pen).epsilon(1e-13));

  const MixingMeasure single({scalar_gaussian(0.0, 1.0)}, {1.0});
  CHECK(penalized_objective(single, data, 3.0) == doctest::Approx(penalized_objective(single, data, 0.0)));

  const MixingMeasure shared({Atom(Vector::Zero(1)), Atom(Vector::Ones(1))}, {0.5, 0.5}, Matrix::Identity(1, 1));
  CHECK(penalized_objective(shared, data, 0.0) ==
        doctest::Approx(oracle::log_likelihood({{0.5, 0.5}, {Vector::Zero(1), Vector::Ones(1)},
                                                {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}},
                                               rows_of(data)))
            .epsilon(1e-13));
}

TEST_CASE("ascent, weight floor and normalization along fits") {
  const MixingMeasure truth = two_blob_truth();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const DataMatrix data = sample(truth, 400, seed);
    const int n = static_cast<int>(data.rows());
    for (ScaleMode mode : {ScaleMode::Free, ScaleMode::Fixed}) {
      EmConfig cfg = favorable_config(truth, 3, mode);
      if (mode == ScaleMode::Fixed) cfg.fixed_covariance = 0.03 * Matrix::Identity(2, 2);
      cfg.max_iters = 60;
      const double xi = cfg.xi_for(n);
      const double floor = xi / (n + cfg.k * xi);

      MixingMeasure g = initial_measure(data, cfg, seed);
      double previous = penalized_objective(g, data, xi);
      for (int t = 0; t < cfg.max_iters; ++t) {
        g = em_step(g, data, cfg);
        const double value = penalized_objective(g, data, xi);
        CHECK(value >= previous - 1e-8);
        previous = value;
        CHECK(*std::min_element(g.weights().begin(), g.weights().end()) >= floor);
        CHECK(std::abs(std::accumulate(g.weights().begin(), g.weights().end(), 0.0) - 1.0) <= 1e-12);
      }

      const FitResult result = fit(data, cfg, seed);
      for (std::size_t t = 1; t < result.objective_trace.size(); ++t) {
        CHECK(result.objective_trace[t] >= result.objective_trace[t - 1] - 1e-8);
      }
    }
  }
}

TEST_CASE("covariance floor and fixed mode") {
  SUBCASE("eigenvalues are raised to the floor") {
    Matrix m(2, 2);
    m << 1.0, 0.0, 0.0, 1e-9;
    const Matrix f = floor_eigenvalues(m, 1e-6);
    CHECK(f(1, 1) == doctest::Approx(1e-6));
    CHECK(f(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("a component on a single point keeps a positive definite covariance") {
    const DataMatrix data = column({0.0, 0.0, 0.0, 5.0, 5.1, 4.9});
    const MixingMeasure g({scalar_gaussian(0.0, 1.0), scalar_gaussian(5.0, 1.0)}, {0.5, 0.5});
    EmConfig cfg;
    cfg.k = 2;
    cfg.xi = 0.0;
    const MixingMeasure next = em_step(g, data, cfg);
    CHECK(next.covariance(0)(0, 0) >= 1e-6 * (1.0 - 1e-12));
  }
  SUBCASE("fixed mode leaves the kernel untouched") {
    const MixingMeasure truth = two_blob_truth();
    const DataMatrix data = sample(truth, 200, 3);
    const Matrix kernel = 0.03 * Matrix::Identity(2, 2);
    const MixingMeasure g({Atom(Vector{{0.1, 0.0}}), Atom(Vector{{0.4, 0.3}})}, {0.5, 0.5}, kernel);
    EmConfig cfg;
    cfg.k = 2;
    cfg.scale_mode = ScaleMode::Fixed;
    const MixingMeasure next = em_step(g, data, cfg);
    CHECK_FALSE(next.has_atom_covariances());
    REQUIRE(next.shared_covariance().has_value());
    CHECK((*next.shared_covariance()).cwiseEqual(kernel).all());
  }
}

TEST_CASE("fit contracts") {
  SUBCASE("single component recovers the sample mean") {
    const MixingMeasure normal({scalar_gaussian(0.0, 1.0)}, {1.0});
    const int n = 2000;
    const DataMatrix data = sample(normal, n, 12);
    EmConfig cfg;
    cfg.k = 1;
    const FitResult result = fit(data, cfg, 12);
    CHECK(result.converged);
    CHECK(std::abs(result.measure.atom(0).mean[0] - data.mean()) <= 4.0 / std::sqrt(n));
    CHECK(result.measure.atom(0).mean[0] == doctest::Approx(data.mean()).epsilon(1e-9));
    CHECK(result.measure.weight(0) == 1.0);
  }
  SUBCASE("one iteration is exactly one step") {
    const MixingMeasure truth = two_blob_truth();
    const DataMatrix data = sample(truth, 100, 2);
    EmConfig cfg = favorable_config(truth, 2, ScaleMode::Free);
    cfg.max_iters = 1;
    const FitResult result = fit(data, cfg, 5);
    CHECK(result.iterations == 1);
    CHECK_FALSE(result.converged);
    CHECK(result.objective_trace.size() == 2);
    const MixingMeasure expected = em_step(initial_measure(data, cfg, 5), data, cfg);
    CHECK(parameter_distance(result.measure, expected) == 0.0);
  }
  SUBCASE("fewer observations than components") {
    EmConfig cfg;
    cfg.k = 10;
    CHECK(kind_of([&] { fit(column({0.0, 1.0, 2.0, 3.0, 4.0}), cfg, 1); }) == ErrorKind::DegenerateData);
  }
  SUBCASE("identical seeds give identical fits") {
    const MixingMeasure truth = two_blob_truth();
    const DataMatrix data = sample(truth, 300, 9);
    EmConfig cfg = favorable_config(truth, 3, ScaleMode::Free);
    cfg.keep_responsibilities = true;
    const FitResult a = fit(data, cfg, 21);
    const FitResult b = fit(data, cfg, 21);
    CHECK(a.iterations == b.iterations);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(parameter_distance(a.measure, b.measure) == 0.0);
    REQUIRE(a.responsibilities.has_value());
    CHECK(a.responsibilities->rows() == 300);
    CHECK((a.responsibilities->array() == b.responsibilities->array()).all());
    const FitResult c = fit(data, cfg, 22);
    CHECK(parameter_distance(a.measure, c.measure) > 0.0);
  }
  SUBCASE("random box start") {
    const DataMatrix data = sample(two_blob_truth(), 200, 1);
    EmConfig cfg;
    cfg.k = 3;
    const MixingMeasure start = initial_measure(data, cfg, 4);
    for (const Atom& a : start.atoms()) {
      for (int c = 0; c < 2; ++c) {
        CHECK(a.mean[c] >= data.col(c).minCoeff());
        CHECK(a.mean[c] <= data.col(c).maxCoeff());
      }
    }
    CHECK(fit(data, cfg, 4).measure.order() == 3);
  }
}

TEST_CASE("favorable start covers every true atom") {
  const MixingMeasure truth = two_blob_truth();
  const DataMatrix data = sample(truth, 10, 1);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EmConfig cfg = favorable_config(truth, 3, ScaleMode::Free);
    std::get<FavorableInit>(cfg.init).jitter_scale = 1e-3;
    const MixingMeasure start = initial_measure(data, cfg, seed);
    for (double w : start.weights()) CHECK(w == doctest::Approx(1.0 / 3.0));
    for (const Atom& t : truth.atoms()) {
      double nearest = 1e9;
      for (const Atom& a : start.atoms()) nearest = std::min(nearest, (a.mean - t.mean).norm());
      CHECK(nearest < 0.01);
    }
  }
}

TEST_CASE("configuration checks") {
  EmConfig cfg;
  CHECK(cfg.xi_for(100) == doctest::Approx(std::log(100.0)));
  cfg.xi = 0.5;
  CHECK(cfg.xi_for(100) == 0.5);
  CHECK_NOTHROW(cfg.validate());
  auto invalid = [](auto mutate) {
    EmConfig c;
    mutate(c);
    return kind_of([&] { c.validate(); });
  };
  CHECK(invalid([](EmConfig& c) { c.max_iters = 0; }) == ErrorKind::InvalidArgument);
  CHECK(invalid([](EmConfig& c) { c.tol = 0.0; }) == ErrorKind::InvalidArgument);
  CHECK(invalid([](EmConfig& c) { c.xi = -1.0; }) == ErrorKind::InvalidArgument);
  CHECK(invalid([](EmConfig& c) { c.covariance_floor = 0.0; }) == ErrorKind::InvalidArgument);
  CHECK(invalid([](EmConfig& c) { c.k = 0; }) == ErrorKind::InvalidArgument);
  CHECK(invalid([](EmConfig& c) { c.init = FavorableInit{two_blob_truth(), 0.0}; }) == ErrorKind::InvalidArgument);

  EmConfig fixed;
  fixed.k = 2;
  fixed.scale_mode = ScaleMode::Fixed;
  CHECK(kind_of([&] { fit(column({0.0, 1.0, 2.0}), fixed, 1); }) == ErrorKind::MissingCovariance);
}
