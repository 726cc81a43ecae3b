#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "marginlab/errors.hpp"
#include "marginlab/opt_chain.hpp"
#include "marginlab/rng.hpp"
#include "marginlab/xor_net.hpp"

using namespace marginlab;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  CounterRng r(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = r.normal();
  return m;
}

// Direct E_i a_i phi(w_i'x) with the block second layer.
double naive_forward(const Eigen::MatrixXd& w, const Eigen::VectorXd& x, double h) {
  const int m = static_cast<int>(w.rows());
  double acc = 0;
  for (int i = 0; i < m; ++i) {
    const double z = w.row(i).dot(x);
    acc += (i < m / 2 ? 1.0 : -1.0) * (z > 0 ? std::pow(z, h) : 0.0);
  }
  return acc / m;
}

}  // namespace

TEST_CASE("forward matches a direct sum and is homogeneous") {
  const Eigen::MatrixXd w = gaussian(8, 12, 1);
  const TwoLayerNet net = TwoLayerNet::from_weights(w, 1.5);
  CHECK(net.a.head(4).minCoeff() == 1.0);
  CHECK(net.a.tail(4).maxCoeff() == -1.0);
  const Eigen::MatrixXd xs = gaussian(12, 5, 2);
  const Eigen::VectorXd batch = net.forward_batch(xs);
  for (int j = 0; j < 5; ++j) {
    CHECK(net.forward(xs.col(j)) == doctest::Approx(naive_forward(w, xs.col(j), 1.5)).epsilon(1e-12));
    CHECK(batch[j] == doctest::Approx(net.forward(xs.col(j))).epsilon(1e-12));
    for (double c : {0.5, 2.0, 10.0}) {
      TwoLayerNet s = net;
      s.w *= c;
      CHECK(s.forward(xs.col(j)) == doctest::Approx(std::pow(c, 1.5) * net.forward(xs.col(j))).epsilon(1e-12));
    }
  }
  CHECK(TwoLayerNet::from_weights(Eigen::MatrixXd::Zero(4, 3), 1.5).forward(xs.col(0).head(3)) == 0.0);
  CHECK_THROWS_AS(TwoLayerNet::from_weights(gaussian(6, 3, 1), 1.5), ValidationError);
  CHECK(net.norm() == doctest::Approx(std::sqrt(w.squaredNorm() / 8)));
  CHECK(net.normalized().norm() == doctest::Approx(1.0));
}

TEST_CASE("normalized margin is scale invariant; zero net flagged") {
  const XorSpec spec = XorSpec::canonical(30, 20, 0.2, 1.5, 8);
  const Dataset ds = sample_xor(spec, 1);
  const TwoLayerNet net = TwoLayerNet::from_weights(gaussian(8, 30, 3), 1.5);
  const double base = normalized_margin(net, ds).normalized_margin;
  for (double c : {0.5, 2.0, 10.0}) {
    TwoLayerNet s = net;
    s.w *= c;
    CHECK(std::abs(normalized_margin(s, ds).normalized_margin - base) <= 1e-9 * std::max(1.0, std::abs(base)));
  }
  const MarginReport z = normalized_margin(TwoLayerNet::from_weights(Eigen::MatrixXd::Zero(8, 30), 1.5), ds);
  CHECK(z.zero_norm);
  CHECK(z.normalized_margin == 0.0);
}

TEST_CASE("signal net: margin 1/4, V = 0, zero cross mass") {
  const XorSpec spec = XorSpec::canonical(64, 40, 0.3, 1.5, 16);
  const Dataset ds = sample_xor(spec, 2);
  const TwoLayerNet net = construct_signal_net(spec);
  CHECK(net.norm() == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::VectorXd x = spec.mu1 + ds.noise.col(0);
  CHECK(net.forward(x) == doctest::Approx(0.25).epsilon(1e-12));
  const MarginReport rep = normalized_margin(net, ds);
  CHECK(rep.normalized_margin == doctest::Approx(0.25).epsilon(1e-12));
  CHECK((rep.per_sample.array() - 0.25).abs().maxCoeff() < 1e-12);
  const NetDecomposition dec = decompose_net(net, ds, spec);
  CHECK(dec.v.norm() < 1e-12);
  CHECK(dec.c.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dec.u + dec.v - net.w).norm() < 1e-12);
  CHECK(cross_mass_diagnostic(dec, ds).total < 1e-20);

  const XorSpec quiet = XorSpec::canonical(64, 40, 0.05, 1.5, 16);
  CHECK(xor_test_error(net, quiet, 10000, 3) <= 0.01);
  // Every opposite point is misclassified by a pure-signal classifier.
  const OppositeAudit audit = opposite_margin_audit(net, ds, spec, 200, 1);
  CHECK(audit.error_psi_s == 1.0);
}

TEST_CASE("decomposition identities on a random net") {
  const XorSpec spec = XorSpec::canonical(40, 16, 0.2, 1.5, 8);
  const Dataset ds = sample_xor(spec, 4);
  const TwoLayerNet net = TwoLayerNet::from_weights(gaussian(8, 40, 5), 1.5);
  const NetDecomposition dec = decompose_net(net, ds, spec);
  CHECK((dec.u + dec.v - net.w).norm() < 1e-12);
  CHECK((dec.v * spec.mu1).norm() < 1e-12);
  CHECK((dec.c - dec.v * ds.noise).norm() < 1e-12);
  CHECK(dec.p1[3] == doctest::Approx(net.w.row(3).dot(spec.mu1)));
  CHECK(dec.s.size() == 4);
}

TEST_CASE("spurious influence bound arithmetic") {
  const double s2 = 0.01;
  const double direct = (8 * 1.0 + 3) * 2 * s2 + 2 * std::pow(2 * s2, 0.75);
  CHECK(spurious_influence_bound(1.0, 1.0, 0.1, 1.0, 1.5) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(spurious_influence_bound(1.0, 1.0, 0.1, 1.0, 1.5) == doctest::Approx(0.3264).epsilon(1e-3));
  CHECK(spurious_influence_bound(1.0, 0.0, 0.1, 3.0, 1.5) == 0.0);
  CHECK_THROWS_AS(spurious_influence_bound(1.0, 1.0, 0.1, 0.5, 1.5), ValidationError);
}

TEST_CASE("spurious coverage is monotone in t") {
  const XorSpec spec = XorSpec::canonical(128, 32, 0.1, 1.5, 8);
  const TwoLayerNet net = TwoLayerNet::from_weights(gaussian(8, 128, 6), 1.5).normalized();
  const std::vector<double> ts{1, 2, 4, 8};
  const std::vector<double> cov = spurious_coverage(net, spec, ts, 2000, 7);
  REQUIRE(cov.size() == 4);
  for (std::size_t i = 1; i < cov.size(); ++i) CHECK(cov[i] >= cov[i - 1]);
  CHECK(cov.back() <= 1.0);
}

TEST_CASE("soft-min margin bounds and gradient") {
  const XorSpec spec = XorSpec::canonical(5, 6, 0.5, 1.5, 4);
  const Dataset ds = sample_xor(spec, 3);
  const TwoLayerNet net = TwoLayerNet::from_weights(gaussian(4, 5, 8), 1.5);
  const double tau = 0.05;
  Eigen::MatrixXd g;
  const double soft = soft_min_margin(net, ds, tau, &g);
  const double hard = (net.forward_batch(ds.x).cwiseProduct(ds.y)).minCoeff();
  CHECK(soft <= hard + 1e-15);
  CHECK(hard <= soft + tau * std::log(6.0) + 1e-15);
  double worst = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) {
      TwoLayerNet p = net, m = net;
      p.w(i, j) += 1e-6;
      m.w(i, j) -= 1e-6;
      worst = std::max(worst, std::abs((soft_min_margin(p, ds, tau) - soft_min_margin(m, ds, tau)) / 2e-6 - g(i, j)));
    }
  CHECK(worst / g.cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("trainer reaches the signal optimum on near-noiseless clusters") {
  // Oracle for sigma -> 0: the data are the four points +-e1 (y = +1) and
  // +-e2 (y = -1). Averaging the margins of +e1 and -e1 gives at most
  // (1/2m) sum_{H+} |w_i1|^h, likewise for e2 with H-, and concavity of
  // r -> r^{h/2} caps the sum of both at 1/2 under E||w_i||^2 = 1. So 1/4 is
  // the maximum; random search in the signal plane confirms nothing beats it.
  const double h = 1.5;
  const int m = 32;
  CounterRng r(77);
  double best_random = -1e300;
  Eigen::Matrix<double, 2, 4> pts;
  pts << 1, -1, 0, 0, 0, 0, 1, -1;
  const Eigen::Vector4d ys(1, 1, -1, -1);
  for (int t = 0; t < 20000; ++t) {
    Eigen::MatrixXd w(m, 2);
    for (int i = 0; i < m; ++i) w.row(i) << r.normal(), r.normal();
    w /= std::sqrt(w.squaredNorm() / m);
    double margin = 1e300;
    for (int j = 0; j < 4; ++j) margin = std::min(margin, ys[j] * naive_forward(w, pts.col(j), h));
    best_random = std::max(best_random, margin);
  }
  CHECK(best_random <= 0.25);

  const XorSpec spec = XorSpec::canonical(64, 24, 1e-3, h, m);
  const Dataset ds = sample_xor(spec, 1);
  TrainerOptions o;
  o.seed = 1;
  const TrainResult tr = train_max_margin(ds, spec, o);
  CHECK(tr.report.normalized_margin >= 0.99 * 0.25);
  int restart = -1;
  double best = -1e300;
  for (const TracePoint& p : tr.trace) {
    if (p.restart != restart) restart = p.restart, best = -1e300;
    CHECK(p.best_margin >= best);
    best = p.best_margin;
  }
}

TEST_CASE("trainer is deterministic per seed") {
  const XorSpec spec = XorSpec::from_kappa(256, 32, 2.0, 1.5, 8);
  const Dataset ds = sample_xor(spec, 2);
  TrainerOptions o;
  o.iterations = 300;
  o.restarts = 2;
  o.seed = 9;
  const TrainResult a = train_max_margin(ds, spec, o), b = train_max_margin(ds, spec, o);
  CHECK(a.net.w == b.net.w);
  CHECK(a.restart_margins == b.restart_margins);
}

TEST_CASE("signal presence on the signal net") {
  const XorSpec spec = XorSpec::canonical(20, 8, 0.1, 1.5, 8);
  const SignalPresence sp = signal_presence(construct_signal_net(spec), spec);
  // Half of H+ rows sit on +mu1 with unit norm: (1/2)(1/2) phi(1).
  CHECK(sp.plus_mu1 == doctest::Approx(0.25));
  CHECK(sp.minus_mu2 == doctest::Approx(0.25));
  CHECK(sp.min() == doctest::Approx(0.25));
}
