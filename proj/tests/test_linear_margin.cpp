#include <cmath>

#include "doctest.h"
#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"
#include "marginlab/linear_margin.hpp"
#include "marginlab/rng.hpp"

using namespace marginlab;

namespace {

Dataset toy(const Eigen::Matrix3d& x, const Eigen::Vector3d& y) {
  Dataset ds;
  ds.problem = Problem::kLinear;
  ds.x = x;
  ds.noise = x;
  ds.noise.row(0).setZero();
  ds.y = y;
  for (int j = 0; j < 3; ++j) ds.signal.push_back(y[j] > 0 ? SignalTag::kPlusMu1 : SignalTag::kMinusMu1);
  ds.sigma = 1.0;
  return ds;
}

// min_j y_j w'x_j over a theta/phi grid of the unit sphere, refined twice
// around the incumbent.
double grid_max_margin(const Eigen::Matrix3d& x, const Eigen::Vector3d& y) {
  const double pi = 3.14159265358979323846;
  auto margin = [&](double th, double ph) {
    const Eigen::Vector3d w(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    return (x.transpose() * w).cwiseProduct(y).minCoeff();
  };
  double best = -1e300, bt = 0, bp = 0;
  const int nt = 600, np = 1200;
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j < np; ++j) {
      const double th = pi * i / nt, ph = 2 * pi * j / np, v = margin(th, ph);
      if (v > best) best = v, bt = th, bp = ph;
    }
  double span = 2 * pi / np;
  for (int round = 0; round < 3; ++round) {
    const double t0 = bt, p0 = bp;
    for (int i = -100; i <= 100; ++i)
      for (int j = -100; j <= 100; ++j) {
        const double th = t0 + span * i / 50.0, ph = p0 + span * j / 50.0, v = margin(th, ph);
        if (v > best) best = v, bt = th, bp = ph;
      }
    span /= 25.0;
  }
  return best;
}

}  // namespace

TEST_CASE("solver agrees with a sphere grid search on 3x3 toys") {
  CounterRng r(42);
  int checked = 0;
  for (int t = 0; t < 12 && checked < 6; ++t) {
    Eigen::Matrix3d x;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = r.normal();
    Eigen::Vector3d y(1, r.uniform01() < 0.5 ? 1 : -1, -1);
    const Dataset ds = toy(x, y);
    const double oracle = grid_max_margin(x, y);
    if (oracle <= 1e-3) continue;  // three generic points in R^3 always separate, but keep it robust
    const SolverResult res = solve_max_margin(ds);
    CHECK(std::abs(res.gamma_star - oracle) <= 1e-3);
    ++checked;
  }
  CHECK(checked >= 6);
}

TEST_CASE("single point max margin") {
  const LinearSpec spec = LinearSpec::canonical(50, 1, 0.2);
  const Dataset ds = sample_linear(spec, 3);
  const SolverResult res = solve_max_margin(ds);
  CHECK(res.gamma_star == doctest::Approx(std::sqrt(1 + 49 * 0.04)).epsilon(1e-8));
  CHECK((res.model.w - ds.y[0] * ds.x.col(0).normalized()).norm() < 1e-8);
}

TEST_CASE("solver certificate and KKT invariants") {
  const LinearSpec spec = LinearSpec::from_kappa(1024, 32, 1.0);
  const Dataset ds = sample_linear(spec, 1);
  const SolverResult res = solve_max_margin(ds);
  CHECK(res.duality_gap <= 1e-8);
  CHECK(res.alpha.minCoeff() >= 0.0);
  CHECK(res.kkt_residual <= 1e-6);
  CHECK(std::abs(res.gamma_star - res.gamma_dual) <= 1e-8 * res.gamma_star);
  CHECK(empirical_error(res.model, ds) == 0.0);
  // Complementary slackness checked independently.
  const Eigen::VectorXd w_raw = res.model.w / res.gamma_star;
  const Eigen::VectorXd m = (ds.x.transpose() * w_raw).cwiseProduct(ds.y);
  CHECK(m.minCoeff() >= 1.0 - 1e-6);
  CHECK(std::abs(res.alpha.dot(m - Eigen::VectorXd::Ones(32))) <= 1e-6 * res.alpha.sum());

  // Concentration lower bound at kappa = 1.
  const double dev = gram_deviation(ds.noise, spec.sigma, spec.d - 1).spectral_norm_dev;
  CHECK(res.gamma_star >= (1 - dev) * std::sqrt(2.0));
}

TEST_CASE("solver failure carries the best gap") {
  Eigen::Matrix3d x = Eigen::Matrix3d::Identity();
  x.col(1) = x.col(0);
  const Dataset ds = toy(x, Eigen::Vector3d(1, -1, 1));
  SolverOptions o;
  o.max_epochs = 50;
  CHECK_THROWS_AS(solve_max_margin(ds, o), SolverError);
}

TEST_CASE("good, bad and mixture margins") {
  const LinearSpec spec = LinearSpec::canonical(2048, 32, 0.125);  // kappa = 1
  const Dataset ds = sample_linear(spec, 7);
  const LinearModel good = construct_good(spec);
  const LinearModel bad = construct_bad(ds, spec);
  CHECK(linear_margin_report(good, ds).normalized_margin == 1.0);
  const double gb = linear_margin_report(bad, ds).normalized_margin;
  CHECK(gb == doctest::Approx(1.0).epsilon(0.2));
  CHECK(std::abs(bad.w.dot(spec.mu)) < 1e-12);

  const double pi = 3.14159265358979323846;
  const double bad_noise = (ds.noise.transpose() * bad.w).cwiseProduct(ds.y).minCoeff();
  for (int i = 0; i <= 20; ++i) {
    const double a = std::cos(pi / 2 * i / 20), b = std::sin(pi / 2 * i / 20);
    const LinearModel mix = construct_mixture(a, b, good, bad);
    CHECK(linear_margin_report(mix, ds).normalized_margin == doctest::Approx(a + b * bad_noise).epsilon(1e-12));
  }
  CHECK_THROWS_AS(construct_mixture(0.5, 0.5, good, bad), ValidationError);
  CHECK_THROWS_AS(LinearModel::from_raw(Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST_CASE("optimal mixture") {
  MixtureOptimum m = optimal_mixture(1, 1);
  CHECK(m.alpha == doctest::Approx(std::sqrt(0.5)));
  CHECK(m.margin == doctest::Approx(std::sqrt(2.0)));
  m = optimal_mixture(1, 0);
  CHECK(m.alpha == 1.0);
  CHECK(m.beta == 0.0);
  m = optimal_mixture(1, std::sqrt(3.0));
  CHECK(m.alpha == doctest::Approx(0.5));
  CHECK(m.beta == doctest::Approx(std::sqrt(3.0) / 2));
  CHECK(m.margin == doctest::Approx(2.0));
  CHECK_THROWS_AS(optimal_mixture(0, 0), ValidationError);

  for (auto [g, b] : {std::pair{0.3, 1.7}, std::pair{2.0, 0.4}}) {
    const MixtureOptimum opt = optimal_mixture(g, b);
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const double a = -1 + 2.0 * i / 100, c = -1 + 2.0 * j / 100;
        if (a * a + c * c > 1) continue;
        CHECK(opt.margin >= a * g + c * b - 1e-12);
      }
  }
}

TEST_CASE("decompose") {
  const LinearSpec spec = LinearSpec::canonical(20, 4, 0.2);
  LinearDecomposition d = decompose(construct_good(spec), spec);
  CHECK(d.v.norm() == 0.0);
  CHECK(d.q.infinite);
  LinearModel perp{Eigen::VectorXd::Unit(20, 3)};
  d = decompose(perp, spec);
  CHECK(d.u.norm() == 0.0);
  CHECK(d.q.value == 0.0);
  CounterRng r(2);
  Eigen::VectorXd w(20);
  for (int i = 0; i < 20; ++i) w[i] = r.normal();
  const LinearModel m = LinearModel::from_raw(w);
  d = decompose(m, spec);
  CHECK((d.u + d.v - m.w).norm() < 1e-12);
  CHECK(d.u.squaredNorm() + d.v.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
  const LinearDecomposition again = decompose(LinearModel::from_raw(d.u + d.v), spec);
  CHECK((again.u - d.u).norm() < 1e-12);
}

TEST_CASE("test error on signal and pure-noise classifiers") {
  const LinearSpec spec = LinearSpec::canonical(200, 10, 0.3);
  const LinearTestError good = test_error(construct_good(spec), spec, 4000, 1);
  CHECK(good.empirical == 0.0);
  CHECK(good.analytic_bound <= std::exp(-200.0 / 8));
  const int mc = 10000;
  const LinearTestError perp = test_error(LinearModel{Eigen::VectorXd::Unit(200, 5)}, spec, mc, 2);
  CHECK(std::abs(perp.empirical - 0.5) <= 3.0 / std::sqrt(mc));
  CHECK(perp.analytic_bound >= 1.0);
  CHECK(perp.samples == mc);
}

TEST_CASE("max-margin generalizes at kappa=2") {
  const LinearSpec spec = LinearSpec::from_kappa(1024, 32, 2.0);
  const Dataset ds = sample_linear(spec, 0);
  const SolverResult res = solve_max_margin(ds);
  CHECK(test_error(res.model, spec, 10000, 0).empirical <= 0.05);
  const TechLemmaRecord t = tech_lemma_diagnostics(res.model, ds, spec);
  CHECK(t.q_over_sqrt_kappa.value >= 2 * std::sqrt(2.0) / 3);
}

TEST_CASE("noise dominates signal at kappa=0.5, d/n=512") {
  const LinearSpec spec = LinearSpec::from_kappa(8192, 16, 0.5);
  const Dataset ds = sample_linear(spec, 0);
  const SolverResult res = solve_max_margin(ds);
  const TechLemmaRecord t = tech_lemma_diagnostics(res.model, ds, spec);
  CHECK(!t.signal_nonpositive);
  CHECK(t.noise_signal_ratio >= 1.0);
  const TechLemmaRecord g = tech_lemma_diagnostics(construct_good(spec), ds, spec);
  CHECK(g.noise_signal_ratio == 0.0);
  const TechLemmaRecord b = tech_lemma_diagnostics(construct_bad(ds, spec), ds, spec);
  CHECK(b.signal_nonpositive);
  CHECK(std::isnan(b.noise_signal_ratio));
}

TEST_CASE("span bound") {
  const LinearSpec spec = LinearSpec::from_kappa(1024, 32, 1.0);
  const Dataset ds = sample_linear(spec, 5);
  const SolverResult res = solve_max_margin(ds);
  const SpanBoundRecord mm = span_bound(ds, res.span_coef, spec);
  CHECK(mm.mu_dot_lower_bound <= mm.mu_dot_measured);
  const SpanBoundRecord mm2 = span_bound_for(ds, res.model.w, spec);
  CHECK(mm2.mu_dot_lower_bound == doctest::Approx(mm.mu_dot_lower_bound / (ds.x * res.span_coef).norm()).epsilon(1e-6));

  const Eigen::VectorXd mean_dir = ds.y / (ds.x * ds.y).norm();
  const SpanBoundRecord md = span_bound(ds, mean_dir, spec);
  CHECK(md.mu_dot_lower_bound > 0.0);
  CHECK(!md.vacuous);
  CHECK(md.loss_bound <= 2.0);

  // Coefficients with y'yhat = 0.
  const Eigen::MatrixXd k = ds.x.transpose() * ds.x;
  Eigen::VectorXd a = Eigen::VectorXd::Unit(32, 0);
  const Eigen::VectorXd ky = k * ds.y;
  a -= (ky.dot(a) / ky.dot(ds.y)) * ds.y;
  const SpanBoundRecord z = span_bound(ds, a, spec);
  CHECK(z.vacuous);
  CHECK(z.mu_dot_lower_bound <= 0.0);

  Eigen::VectorXd off = Eigen::VectorXd::Zero(1024);
  off += ds.x.col(0);
  off[1000] += 1.0 + std::abs(off[1000]);
  CHECK_THROWS_AS(span_bound_for(ds, off, spec), ValidationError);
}
