#include <cmath>

#include "doctest.h"
#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"
#include "marginlab/rng.hpp"
#include "marginlab/synthdata.hpp"

using namespace marginlab;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  CounterRng r(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = r.normal();
  return m;
}

}  // namespace

TEST_CASE("gram deviation trivial cases") {
  Eigen::MatrixXd one(5, 1);
  one << 1, 2, 0, -1, 3;
  const double sigma2 = one.squaredNorm() / 5.0;
  CHECK(gram_deviation(one, std::sqrt(sigma2), 5).spectral_norm_dev < 1e-12);
  CHECK(gram_deviation(Eigen::MatrixXd::Zero(10, 3), 1.0, 10).spectral_norm_dev == doctest::Approx(1.0));
  const GramDeviation g = gram_deviation(gaussian(100, 4, 1), 1.0, 100, 2.0);
  CHECK(g.bound_rhs == doctest::Approx(2.0 * std::sqrt(4.0 / 100.0)));
  CHECK(g.ratio == doctest::Approx(g.spectral_norm_dev / std::sqrt(0.04)));
}

TEST_CASE("gram deviation matches a dense eigen oracle") {
  // Large n takes the power-iteration path.
  const Eigen::MatrixXd xi = gaussian(400, 120, 3);
  const Eigen::MatrixXd m = xi.transpose() * xi / 400.0 - Eigen::MatrixXd::Identity(120, 120);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double want = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(gram_deviation(xi, 1.0, 400).spectral_norm_dev == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("gram deviation concentrates at d'=4096, n=64") {
  int ok = 0;
  for (int s = 0; s < 100; ++s) {
    const Eigen::MatrixXd xi = gaussian(4096, 64, 1000 + s);
    if (gram_deviation(xi, 1.0, 4096).spectral_norm_dev <= 0.4) ++ok;
  }
  CHECK(ok >= 99);
}

TEST_CASE("sampled noise gram at d=2048, n=64") {
  const Dataset ds = sample_linear(LinearSpec::canonical(2048, 64, 0.25), 0);
  CHECK(gram_deviation(ds.noise, 0.25, 2047).spectral_norm_dev <= 0.5);
}

TEST_CASE("min-norm solve rank one and zero target") {
  Eigen::MatrixXd xi(4, 1);
  xi << 1, -2, 0.5, 3;
  Eigen::VectorXd c(1);
  c << 1.0;
  const Eigen::VectorXd v = min_norm_solve(xi, c);
  CHECK((v - xi.col(0) / xi.squaredNorm()).norm() < 1e-15);
  CHECK(v.squaredNorm() == doctest::Approx(1.0 / xi.squaredNorm()));
  const Eigen::MatrixXd big = gaussian(50, 10, 2);
  CHECK(min_norm_solve(big, Eigen::VectorXd::Zero(10)).norm() == 0.0);
}

TEST_CASE("min-norm solve residual, norm sandwich and minimality") {
  const double sigma = 0.3;
  const Dataset ds = sample_linear(LinearSpec::canonical(512, 32, sigma), 4);
  const Eigen::VectorXd c = gaussian(32, 1, 5).col(0);
  const MinNormSolver solver(ds.noise);
  const Eigen::VectorXd v = solver.solve(c);
  CHECK((ds.noise.transpose() * v - c).cwiseAbs().maxCoeff() <= 1e-8 * c.cwiseAbs().maxCoeff());

  const int dp = 511;
  const double dev = gram_deviation(ds.noise, sigma, dp).spectral_norm_dev;
  const double base = c.squaredNorm() / (sigma * sigma * dp);
  CHECK(v.squaredNorm() >= base / (1.0 + dev));
  CHECK(v.squaredNorm() <= base / (1.0 - dev));

  CounterRng r(6);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd delta(512);
    for (int i = 0; i < 512; ++i) delta[i] = r.normal();
    delta -= solver.solve(ds.noise.transpose() * delta);
    CHECK((ds.noise.transpose() * delta).norm() < 1e-9);
    CHECK((v + delta).norm() >= v.norm() - 1e-9);
  }

  Eigen::MatrixXd targets(32, 3);
  targets << c, 2 * c, -c;
  const Eigen::MatrixXd many = solver.solve_many(targets);
  CHECK((many.col(1) - 2 * v).norm() < 1e-10 * v.norm());
  CHECK(!solver.ill_conditioned());
}

TEST_CASE("singular gram is reported with its eigenvalue") {
  Eigen::MatrixXd xi = gaussian(20, 3, 7);
  xi.col(2) = xi.col(0);
  try {
    MinNormSolver s(xi);
    FAIL("expected SingularGramError");
  } catch (const SingularGramError& e) {
    CHECK(std::abs(e.smallest_eigenvalue()) < 1e-8);
  }
}

TEST_CASE("activation values") {
  for (double h : {1.0, 1.3, 1.5, 1.9}) CHECK(activation(-3.0, h) == 0.0);
  CHECK(activation(2.0, 1.5) == doctest::Approx(std::pow(2.0, 1.5)));
  // phi(s+t) <= 2^{h-1}(phi(s)+phi(t)), equality at s = t = 1
  CHECK(activation(2.0, 1.5) == doctest::Approx(std::pow(2.0, 0.5) * 2.0));
  CounterRng r(8);
  for (int i = 0; i < 5000; ++i) {
    const double s = 4 * r.uniform01() - 2, t = 4 * r.uniform01() - 2, h = 1 + r.uniform01() * 0.999;
    CHECK(activation(s + t, h) <= std::pow(2.0, h - 1) * (activation(s, h) + activation(t, h)) * (1 + 1e-12));
  }
}

TEST_CASE("activation gradient vs central differences") {
  for (double z : {0.3, 1.0, 2.0}) {
    for (double h : {1.2, 1.5, 1.9}) {
      const double e = 1e-6;
      const double fd = (activation(z + e, h) - activation(z - e, h)) / (2 * e);
      CHECK(std::abs(fd - activation_grad(z, h)) <= 1e-6);
    }
  }
  CHECK(activation_grad(0.0, 1.0) == 0.0);
  CHECK(activation_grad(-1.0, 1.5) == 0.0);
}
