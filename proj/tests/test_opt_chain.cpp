#include <cmath>

#include "doctest.h"
#include "marginlab/errors.hpp"
#include "marginlab/opt_chain.hpp"

using namespace marginlab;

namespace {

// Independent route to kappa_gen: squaring the defining equation gives the
// fixed point kappa = 2^{1+2/h} / S(kappa)^2 with S the right-hand side. The
// map contracts with slope 4 / (kappa + 4) at the root.
double fixed_point_kappa(double h) {
  double k = 2.0;
  for (int i = 0; i < 100000; ++i) {
    const double s = std::sqrt(k / (4.0 + k)) + std::sqrt(16.0 / (k * (4.0 + k)));
    const double next = std::pow(2.0, 1.0 + 2.0 / h) / (s * s);
    if (std::abs(next - k) < 1e-15) return next;
    k = next;
  }
  return k;
}

double phi(double z, double h) { return z > 0 ? std::pow(z, h) : 0.0; }

}  // namespace

TEST_CASE("kappa_gen roots") {
  CHECK(kappa_gen_xor(1.0) == doctest::Approx(4.0).epsilon(1e-12));
  // Both sides equal sqrt(2) at kappa = 4, h = 1.
  CHECK(2 * std::sqrt(0.5) == doctest::Approx(std::sqrt(0.5) + std::sqrt(0.5)));
  const double k15 = kappa_gen_xor(1.5);
  CHECK(k15 == doctest::Approx(1.040).epsilon(0.01));
  CHECK(k15 == doctest::Approx(fixed_point_kappa(1.5)).epsilon(1e-9));
  CHECK(kappa_gen_xor(1.99) < 0.05);
  // Squared form also has the closed solution 2^{1+2/h} - 4.
  for (double h : {1.0, 1.25, 1.5, 1.75, 1.95}) {
    CHECK(kappa_gen_xor(h) == doctest::Approx(std::pow(2.0, 1.0 + 2.0 / h) - 4.0).epsilon(1e-10));
    CHECK(kappa_gen_xor(h) == doctest::Approx(fixed_point_kappa(h)).epsilon(1e-9));
  }
  double prev = 5;
  for (int i = 0; i < 20; ++i) {
    const double h = 1.0 + 0.05 * i;
    const double k = kappa_gen_xor(h);
    CHECK(k > 0);
    CHECK(k <= 4.0 + 1e-12);
    CHECK(k <= prev);
    CHECK(std::abs(threshold_residual(k, h)) <= 1e-9);
    CHECK(std::abs(gamma_0(k, h) - gamma_star(k, h)) <= 1e-8);
    prev = k;
  }
  CHECK_THROWS(kappa_gen_xor(2.5));
}

TEST_CASE("gamma values") {
  CHECK(gamma_0(2.0, 1.5) == doctest::Approx(2.0));
  const double k = 4.0;
  CHECK(std::sqrt(k / (4 + k)) == doctest::Approx(std::sqrt(16 / (k * (4 + k)))));
  CHECK(gamma_star(4.0, 1.3) == doctest::Approx(std::pow(2 * std::sqrt(0.5), 1.3)));
}

TEST_CASE("regions") {
  CHECK(region_name(classify_region(Problem::kXor, 2.0, 1.5)) == "gen_no_uc");
  CHECK(region_name(classify_region(Problem::kXor, 0.5, 1.5)) == "no_gen");
  CHECK(region_name(classify_region(Problem::kXor, 8.0, 1.5)) == "uc");
  CHECK(region_name(classify_region(Problem::kLinear, 0.5, 1.5)) == "gen_no_uc");
  CHECK(region_name(classify_region(Problem::kLinear, 2.0, 1.5)) == "uc");
  const Thresholds t = Thresholds::for_h(1.5);
  CHECK(t.kappa_uc_xor == 4.0);
  CHECK(t.kappa_gen_xor == doctest::Approx(kappa_gen_xor(1.5)));
}

TEST_CASE("opt5 closed form at k=1") {
  const TrivariatePoint p = solve_opt5(1.0, 1.0, 1.5);
  CHECK(p.b == doctest::Approx(std::sqrt(0.5)));
  CHECK(p.c == doctest::Approx(std::sqrt(0.5)));
  CHECK(p.d == 0.0);
  CHECK(p.objective == doctest::Approx(std::pow(2.0, 0.75) / 4));
  CHECK(std::abs(p.constraint() - 1.0) <= 1e-9);
  for (double p5 : {0.25, 3.0}) {
    CHECK(solve_opt5(1.0, p5, 1.5).objective == doctest::Approx(std::pow(p5, 0.75) * p.objective).epsilon(1e-12));
  }
  CHECK_THROWS_AS(solve_opt5(0.0, 1.0, 1.5), ValidationError);
  CHECK_THROWS_AS(solve_opt5(1.0, -1.0, 1.5), ValidationError);
}

TEST_CASE("opt5 below the threshold uses the b=0 branch") {
  const double h = 1.5, k = 0.05;
  const TrivariatePoint p = solve_opt5(k, 1.0, h);
  CHECK(p.b == 0.0);
  CHECK(p.c == doctest::Approx(p.d));
  CHECK(p.objective == doctest::Approx(gamma_0(4 * k, h) / 4));
  const TrivariatePoint w = solve_opt5_without_signal(2.0, 1.0, h);
  CHECK(w.b == 0.0);
  CHECK(std::abs(w.constraint() - 1.0) <= 1e-9);
}

TEST_CASE("opt5 closed form vs brute force oracle") {
  for (double k : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    for (double h : {1.1, 1.5, 1.9}) {
      const TrivariatePoint cf = canonicalize(solve_opt5(k, 1.0, h));
      const TrivariatePoint orc = canonicalize(opt5_oracle(k, 1.0, h, 200));
      CHECK(std::abs(cf.objective - orc.objective) <= 1e-6);
      CHECK(orc.constraint() <= 1.0 + 1e-9);
      CHECK(std::abs(cf.b - orc.b) <= 1e-3);
      // On the b = 0 branch c and d are interchangeable.
      if (cf.b == 0.0) {
        CHECK(std::abs(std::max(cf.c, cf.d) - std::max(orc.c, orc.d)) <= 1e-3);
      } else {
        CHECK(std::abs(cf.c - orc.c) <= 1e-3);
        CHECK(std::abs(cf.d - orc.d) <= 1e-3);
      }
    }
  }
  CHECK(std::abs(opt5_oracle(0.01, 1.0, 1.5, 100).b) < 1e-3);
  CHECK_THROWS_AS(opt5_oracle(1.0, 1.0, 1.5, 10), ValidationError);
}

TEST_CASE("opt5 objective symmetry") {
  CHECK(opt5_objective(0.3, 0.7, 0.2, 1.5) == doctest::Approx(opt5_objective(-0.3, 0.2, 0.7, 1.5)));
  const double direct = 0.25 * (phi(0.3 + 0.7, 1.5) + phi(-0.3 + 0.2, 1.5));
  CHECK(opt5_objective(0.3, 0.7, 0.2, 1.5) == doctest::Approx(direct));
}

TEST_CASE("trivariate ratios") {
  const double h = 1.5;
  TrivariateRatios r = trivariate_ratios(solve_opt5(1.0, 1.0, h), h);
  CHECK(r.b_side == doctest::Approx(std::pow(0.5, h)));
  CHECK(!r.d_side_defined);
  CHECK(r.reference == doctest::Approx(std::pow(0.5, h)));
  r = trivariate_ratios(solve_opt5(2.0, 1.0, h), h);
  CHECK(r.b_side == doctest::Approx(std::pow(2.0 / 3.0, h)));
  CHECK(r.reference == doctest::Approx(std::pow(2.0 / 3.0, h)));
}

TEST_CASE("no_gen construction: U = 0 and coin-flip error") {
  const XorSpec spec = XorSpec::from_kappa(1024, 64, 0.5, 1.5, 16);
  const Dataset ds = sample_xor(spec, 3);
  const Construction con = construct_network(ds, spec, ConstructMode::no_gen());
  const NetDecomposition dec = decompose_net(con.net, ds, spec);
  CHECK(dec.u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(dec.s.cwiseAbs().maxCoeff() == 0.0);
  CHECK(dec.t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(con.net.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(xor_test_error(con.net, spec, 10000, 4) - 0.5) <= 0.03);
  CHECK(empirical_error(con.net, ds) == 0.0);
  const OppositeAudit audit = opposite_margin_audit(con.net, ds, spec, 500, 5);
  CHECK(audit.margin_psi_s == doctest::Approx(audit.margin_s).epsilon(1e-12));
}

TEST_CASE("optimal construction: equal margins, zero cross clusters, opposite failure") {
  const XorSpec spec = XorSpec::from_kappa(2048, 64, 2.0, 1.5, 32);
  const Dataset ds = sample_xor(spec, 0);
  const Construction con = construct_network(ds, spec, ConstructMode::optimal());
  CHECK(con.net.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(con.kappa_hat == doctest::Approx(4.0 * con.n_min / (spec.d * spec.sigma * spec.sigma)));
  CHECK(con.point.b > 0);
  const MarginReport rep = normalized_margin(con.net, ds);
  CHECK(rep.per_sample.maxCoeff() <= 1.03 * rep.per_sample.minCoeff());

  const NetDecomposition dec = decompose_net(con.net, ds, spec);
  const int half = con.net.half();
  double cross = 0;
  for (int i = 0; i < con.net.m(); ++i) {
    const bool plus = i < half;
    for (int j = 0; j < ds.n(); ++j) {
      if ((ds.y[j] > 0) != plus) cross = std::max(cross, std::abs(dec.c(i, j)));
    }
  }
  CHECK(cross <= 1e-8);
  CHECK(cross_mass_diagnostic(dec, ds).total <= 1e-16);

  const OppositeAudit audit = opposite_margin_audit(con.net, ds, spec, 4000, 1);
  CHECK(audit.error_psi_s == 0.0);
  CHECK(audit.error_psi_d >= 0.9);
  CHECK(audit.margin_ratio > 0.0);
}

TEST_CASE("scaled construction shrinks the signal coordinate") {
  const XorSpec spec = XorSpec::from_kappa(512, 32, 2.0, 1.5, 8);
  const Dataset ds = sample_xor(spec, 1);
  const Construction full = construct_network(ds, spec, ConstructMode::optimal());
  const Construction half = construct_network(ds, spec, ConstructMode::scaled(0.5));
  CHECK(half.point.b == doctest::Approx(0.5 * full.point.b));
  CHECK(std::abs(half.point.constraint() - full.point.p5) <= 1e-9 * full.point.p5);
  CHECK(ConstructMode::scaled(0.5).name().find("scaled") != std::string::npos);
}
