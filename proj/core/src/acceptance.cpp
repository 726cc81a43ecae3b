#include "marginlab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {
namespace {

namespace th = accept_threshold;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g6(double v) { return fmt("%.6g", v); }

ExperimentConfig linear_cfg(int n, int d, double kappa, int mc) {
  ExperimentConfig c;
  c.problem = Problem::kLinear;
  c.n = n;
  c.d = d;
  c.kappa = kappa;
  c.mc_samples = mc;
  return c;
}

ExperimentConfig xor_cfg(double kappa) {
  ExperimentConfig c;
  c.problem = Problem::kXor;
  c.n = 64;
  c.d = 2048;
  c.m = 64;
  c.h = 1.5;
  c.kappa = kappa;
  c.mc_samples = 10000;
  c.trainer.epsilon = th::kXorEpsilon;
  return c;
}

// Record tables shared by several criteria.
struct Tables {
  std::vector<TrialRecord> solver;       // 3
  std::vector<TrialRecord> linear_gen;   // 4, 5
  std::vector<TrialRecord> linear_uc;    // 6
  std::vector<TrialRecord> vacuity;      // 7
  std::vector<TrialRecord> xor_gen;      // 8, 10
  std::vector<TrialRecord> xor_nogen;    // 9
};

struct Job {
  std::vector<TrialRecord>* table;
  std::function<TrialRecord()> run;
};

void add_trials(std::vector<Job>& jobs, std::vector<TrialRecord>* table, const ExperimentConfig& cfg,
                int seeds) {
  for (int s = 0; s < seeds; ++s) {
    jobs.push_back({table, [cfg, s] { return run_trial(cfg, static_cast<std::uint64_t>(s)); }});
  }
}

Tables collect(const std::set<int>& need, int workers) {
  Tables t;
  std::vector<Job> jobs;
  if (need.count(3)) add_trials(jobs, &t.solver, linear_cfg(32, 2048, 1.0, 500), 50);
  if (need.count(4) || need.count(5)) add_trials(jobs, &t.linear_gen, linear_cfg(32, 1024, 2.0, 10000), 5);
  if (need.count(6)) add_trials(jobs, &t.linear_uc, linear_cfg(16, 8192, 0.5, 10000), 5);
  if (need.count(7)) add_trials(jobs, &t.vacuity, linear_cfg(32, 2048, 3.0, 10000), 3);
  if (need.count(8) || need.count(10)) add_trials(jobs, &t.xor_gen, xor_cfg(2.0), 5);
  if (need.count(9)) add_trials(jobs, &t.xor_nogen, xor_cfg(0.5), 3);

  std::vector<std::function<TrialRecord()>> runs;
  for (const Job& j : jobs) runs.push_back(j.run);
  std::vector<TrialRecord> out = run_parallel(runs, resolve_workers(workers));
  for (std::size_t i = 0; i < jobs.size(); ++i) jobs[i].table->push_back(std::move(out[i]));
  for (auto* tab : {&t.solver, &t.linear_gen, &t.linear_uc, &t.vacuity, &t.xor_gen, &t.xor_nogen}) {
    sort_records(*tab);
  }
  return t;
}

std::map<std::string, std::string> tables_to_csv(const Tables& t) {
  std::map<std::string, std::string> out;
  auto put = [&out](const char* name, const std::vector<TrialRecord>& recs) {
    if (!recs.empty()) out[name] = records_to_csv(recs);
  };
  put("linear_solver.csv", t.solver);
  put("linear_gen.csv", t.linear_gen);
  put("linear_uc.csv", t.linear_uc);
  put("linear_vacuity.csv", t.vacuity);
  put("xor_gen.csv", t.xor_gen);
  put("xor_nogen.csv", t.xor_nogen);
  return out;
}

std::uint64_t hash_tables(const std::map<std::string, std::string>& csvs) {
  // Tables are visited in name order; the CSV header must stay the first line.
  std::vector<std::string> texts;
  for (const auto& entry : csvs) texts.push_back(entry.second);
  return determinism_hash(texts);
}

// A failed trial fails every criterion that reads it.
bool all_ok(const std::vector<TrialRecord>& recs, std::string& detail) {
  for (const auto& r : recs) {
    if (r.status.rfind("failed", 0) == 0) {
      detail = "seed " + std::to_string(r.seed) + " " + r.status;
      return false;
    }
  }
  return !recs.empty();
}

// ---- criteria ----

CriterionResult c1_opt5() {
  CriterionResult r{1, "trivariate closed form matches brute-force oracle", true, "", 0.0};
  double worst_obj = 0.0, worst_con = 0.0;
  for (double k : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    for (double h : {1.1, 1.5, 1.9}) {
      const TrivariatePoint cf = solve_opt5(k, 1.0, h);
      const TrivariatePoint orc = opt5_oracle(k, 1.0, h, 200);
      worst_obj = std::max(worst_obj, std::abs(cf.objective - orc.objective));
      worst_con = std::max(worst_con, std::abs(cf.constraint() - 1.0));
    }
  }
  r.passed = worst_obj <= th::kOpt5Objective && worst_con <= th::kOpt5Constraint;
  r.detail = "max |objective gap|=" + g6(worst_obj) + " (tol " + g6(th::kOpt5Objective) +
             "), max |constraint-1|=" + g6(worst_con) + " (tol " + g6(th::kOpt5Constraint) + ")";
  return r;
}

// Independent route to the threshold: squaring the defining equation gives
// the fixed point kappa = 2^{1+2/h} / S(kappa)^2, S the right-hand side,
// which contracts with slope 4 / (kappa + 4) at the root.
double kappa_gen_fixed_point(double h) {
  double kappa = 2.0;
  for (int it = 0; it < 100000; ++it) {
    const double s = std::sqrt(kappa / (4.0 + kappa)) + std::sqrt(16.0 / (kappa * (4.0 + kappa)));
    const double next = std::pow(2.0, 1.0 + 2.0 / h) / (s * s);
    if (std::abs(next - kappa) < 1e-15) return next;
    kappa = next;
  }
  return kappa;
}

CriterionResult c2_thresholds() {
  CriterionResult r{2, "regime thresholds", true, "", 0.0};
  const double k1 = kappa_gen_xor(1.0);
  const double lhs = 2.0 * std::sqrt(2.0 / 4.0);
  const double rhs = std::sqrt(4.0 / 8.0) + std::sqrt(16.0 / 32.0);
  const bool at_h1 = std::abs(k1 - 4.0) <= th::kKappaGenAtH1 &&
                     std::abs(lhs - std::sqrt(2.0)) <= 1e-15 && std::abs(rhs - std::sqrt(2.0)) <= 1e-15;

  double worst_cross = 0.0;
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 9; ++i) {
    const double h = 1.0 + 0.1 * i;
    const double k = kappa_gen_xor(h);
    worst_cross = std::max(worst_cross, std::abs(gamma_0(k, h) - gamma_star(k, h)));
    if (k > prev) monotone = false;
    prev = k;
  }
  const double k15 = kappa_gen_xor(1.5);
  const double fp = kappa_gen_fixed_point(1.5);
  const bool k15_ok = std::abs(k15 - th::kKappaGen15) <= th::kKappaGen15Tol &&
                      std::abs(fp - th::kKappaGen15) <= th::kKappaGen15Tol &&
                      std::abs(k15 - fp) <= 1e-8;
  r.passed = at_h1 && worst_cross <= th::kGammaCrossing && monotone && k15_ok;
  r.detail = "kappa_gen(1)=" + fmt("%.12g", k1) + ", max |gamma0-gamma*| at root=" + g6(worst_cross) +
             ", monotone=" + (monotone ? "yes" : "no") + ", kappa_gen(1.5)=" + fmt("%.10g", k15) +
             " vs fixed point " + fmt("%.10g", fp);
  return r;
}

CriterionResult c3_solver(const Tables& t) {
  CriterionResult r{3, "linear solver soundness", true, "", 0.0};
  if (!all_ok(t.solver, r.detail)) return r.passed = false, r;
  double worst_gap = 0.0;
  int dominated = 0, meets_lb = 0;
  for (const auto& rec : t.solver) {
    const double gap = rec.extra("duality_gap");
    worst_gap = std::max(worst_gap, gap);
    // The solver's value is certified to relative accuracy kDualityGap.
    const double other = std::max(rec.margin_good, rec.margin_constructed);
    if (rec.gamma_star * (1.0 + th::kDualityGap) < other) ++dominated;
    if (rec.gamma_star >= rec.extra("gamma_lower_bound")) ++meets_lb;
  }
  const double frac = static_cast<double>(meets_lb) / t.solver.size();
  r.passed = worst_gap <= th::kDualityGap && dominated == 0 && frac >= th::kLowerBoundFraction;
  r.detail = "max gap=" + g6(worst_gap) + ", trials beaten by w_g/mixture=" + std::to_string(dominated) +
             ", lower bound met on " + std::to_string(meets_lb) + "/" + std::to_string(t.solver.size());
  return r;
}

CriterionResult c4_linear_gen(const Tables& t) {
  CriterionResult r{4, "linear generalization at kappa=2", true, "", 0.0};
  if (!all_ok(t.linear_gen, r.detail)) return r.passed = false, r;
  double worst_err = 0.0, worst_q = std::numeric_limits<double>::infinity();
  for (const auto& rec : t.linear_gen) {
    worst_err = std::max(worst_err, rec.test_err);
    worst_q = std::min(worst_q, rec.q_ratio);
  }
  r.passed = worst_err <= th::kLinearGenTestErr && worst_q >= th::kLinearQRatio;
  r.detail = "max test err=" + g6(worst_err) + ", min q/sqrt(kappa)=" + g6(worst_q);
  return r;
}

CriterionResult c5_bad_baseline(const Tables& t) {
  CriterionResult r{5, "noise-only interpolator has error 1/2", true, "", 0.0};
  if (!all_ok(t.linear_gen, r.detail)) return r.passed = false, r;
  double worst = 0.0;
  for (const auto& rec : t.linear_gen) worst = std::max(worst, std::abs(rec.extra("bad_test_err") - th::kHalf));
  r.passed = worst <= th::kLinearHalfTol;
  r.detail = "max |err - 0.5|=" + g6(worst) + " over " + std::to_string(t.linear_gen.size()) + " seeds";
  return r;
}

CriterionResult c6_linear_uc(const Tables& t) {
  CriterionResult r{6, "linear uniform-convergence witness at kappa=0.5", true, "", 0.0};
  if (!all_ok(t.linear_uc, r.detail)) return r.passed = false, r;
  double min_acc = 1.0, min_bar = 1.0, max_test = 0.0, min_wit = 1.0;
  for (const auto& rec : t.linear_uc) {
    const bool in_band = classify_region(Problem::kLinear, rec.kappa, rec.h) == Region::kGeneralizationNoUc;
    const UcDemoRecord demo = summarize_uc_demo(rec, in_band);
    min_acc = std::min(min_acc, demo.accuracy_psi_S);
    min_bar = std::min(min_bar, demo.err_psibar_S);
    max_test = std::max(max_test, demo.test_err);
    min_wit = std::min(min_wit, demo.witness);
  }
  r.passed = min_acc == 1.0 && min_bar == 1.0 && max_test <= th::kUcTestErr && min_wit >= th::kUcWitness;
  r.detail = "min acc on psi(S)=" + g6(min_acc) + ", min err on psibar(S)=" + g6(min_bar) +
             ", max test err=" + g6(max_test) + ", min witness=" + g6(min_wit);
  return r;
}

CriterionResult c7_vacuity(const Tables& t) {
  CriterionResult r{7, "half the max margin with error 1/2 at kappa=3", true, "", 0.0};
  if (!all_ok(t.vacuity, r.detail)) return r.passed = false, r;
  double worst_ratio = 0.0, worst_err = 0.0;
  for (const auto& rec : t.vacuity) {
    const VacuityRecord v = summarize_vacuity(rec);
    worst_ratio = std::max(worst_ratio, std::abs(v.margin_ratio - th::kHalf));
    worst_err = std::max(worst_err, std::abs(v.test_err - th::kHalf));
  }
  r.passed = worst_ratio <= th::kVacuityRatioTol && worst_err <= th::kLinearHalfTol;
  r.detail = "max |ratio - 0.5|=" + g6(worst_ratio) + ", max |err - 0.5|=" + g6(worst_err);
  return r;
}

CriterionResult c8_xor_gen(const Tables& t) {
  CriterionResult r{8, "xor generalization at kappa=2, h=1.5", true, "", 0.0};
  std::vector<TrialRecord> recs(t.xor_gen.begin(), t.xor_gen.begin() + std::min<std::size_t>(3, t.xor_gen.size()));
  if (!all_ok(recs, r.detail)) return r.passed = false, r;
  double min_ratio = std::numeric_limits<double>::infinity(), max_err = 0.0;
  double min_sp = std::numeric_limits<double>::infinity();
  for (const auto& rec : recs) {
    min_ratio = std::min(min_ratio, rec.margin_trained / rec.margin_constructed);
    max_err = std::max(max_err, rec.test_err);
    min_sp = std::min(min_sp, rec.extra("sp_min_over_margin"));
  }
  r.passed = min_ratio >= 1.0 - th::kXorEpsilon && max_err <= th::kXorTestErr && min_sp >= th::kSignalPresence;
  r.detail = "min trained/constructed=" + g6(min_ratio) + ", max test err=" + g6(max_err) +
             ", min signal presence/margin=" + g6(min_sp);
  return r;
}

CriterionResult c9_xor_nogen(const Tables& t) {
  CriterionResult r{9, "xor no-generalization construction at kappa=0.5", true, "", 0.0};
  if (!all_ok(t.xor_nogen, r.detail)) return r.passed = false, r;
  double max_u = 0.0, min_frac = std::numeric_limits<double>::infinity(), worst_err = 0.0;
  for (const auto& rec : t.xor_nogen) {
    max_u = std::max(max_u, rec.extra("nog_u_max_abs"));
    min_frac = std::min(min_frac, rec.margin_bad / rec.margin_trained);
    worst_err = std::max(worst_err, std::abs(rec.extra("nog_test_err") - th::kHalf));
  }
  r.passed = max_u == 0.0 && min_frac >= th::kNoGenMarginFraction && worst_err <= th::kXorHalfTol;
  r.detail = "max |U entry|=" + g6(max_u) + ", min no-gen/trained margin=" + g6(min_frac) +
             ", max |err - 0.5|=" + g6(worst_err);
  return r;
}

CriterionResult c10_xor_uc(const Tables& t) {
  CriterionResult r{10, "xor opposite-sample failure at kappa=2", true, "", 0.0};
  if (!all_ok(t.xor_gen, r.detail)) return r.passed = false, r;
  int good = 0;
  std::ostringstream per;
  for (const auto& rec : t.xor_gen) {
    if (rec.err_psi_S <= th::kPsiSampleErr && rec.err_psi_D >= th::kPsiDistErr) ++good;
    per << " [" << g6(rec.err_psi_S) << "/" << g6(rec.err_psi_D) << "]";
  }
  r.passed = good >= th::kPsiSeedsRequired;
  r.detail = std::to_string(good) + "/" + std::to_string(t.xor_gen.size()) +
             " seeds pass; err psi(S)/psi(D):" + per.str();
  return r;
}

CriterionResult c11_kernels() {
  CriterionResult r{11, "kernel-level properties", true, "", 0.0};
  std::vector<std::string> failures;
  CounterRng rng(20240611);

  // Gradient of the soft-min margin vs central differences.
  {
    const XorSpec spec = XorSpec::canonical(5, 6, 0.5, 1.5, 4);
    const Dataset ds = sample_xor(spec, 3);
    Eigen::MatrixXd w(4, 5);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) w(i, j) = rng.normal();
    TwoLayerNet net = TwoLayerNet::from_weights(w, 1.5);
    Eigen::MatrixXd g;
    const double tau = 0.05;
    soft_min_margin(net, ds, tau, &g);
    double worst = 0.0;
    const double step = 1e-6;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 5; ++j) {
        TwoLayerNet p = net, m = net;
        p.w(i, j) += step;
        m.w(i, j) -= step;
        const double fd = (soft_min_margin(p, ds, tau) - soft_min_margin(m, ds, tau)) / (2 * step);
        worst = std::max(worst, std::abs(fd - g(i, j)));
      }
    }
    const double rel = worst / g.cwiseAbs().maxCoeff();
    if (!(rel <= th::kGradientRel)) failures.push_back("gradient rel err " + g6(rel));
    r.detail += "grad rel err=" + g6(rel);
  }

  // Min-norm residual and minimality.
  {
    const LinearSpec spec = LinearSpec::canonical(512, 32, 0.3);
    const Dataset ds = sample_linear(spec, 5);
    Eigen::VectorXd c(32);
    for (int j = 0; j < 32; ++j) c[j] = rng.normal();
    const MinNormSolver solver(ds.noise);
    const Eigen::VectorXd v = solver.solve(c);
    const double resid = (ds.noise.transpose() * v - c).cwiseAbs().maxCoeff();
    if (!(resid <= 1e-8 * c.cwiseAbs().maxCoeff())) failures.push_back("min-norm residual " + g6(resid));
    int violations = 0;
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd delta(512);
      for (int i = 0; i < 512; ++i) delta[i] = rng.normal();
      delta -= solver.solve(ds.noise.transpose() * delta);  // now Xi' delta = 0
      if ((v + delta).norm() < v.norm() - 1e-9) ++violations;
    }
    if (violations) failures.push_back("min-norm minimality violated " + std::to_string(violations) + "x");
    r.detail += ", min-norm resid=" + g6(resid);
  }

  // phi(s + t) <= 2^{h-1} (phi(s) + phi(t)).
  {
    int bad = 0;
    for (int t = 0; t < 10000; ++t) {
      const double s = 6.0 * rng.uniform01() - 3.0;
      const double u = 6.0 * rng.uniform01() - 3.0;
      const double h = 1.0 + rng.uniform01() * (1.0 - 1e-12);
      const double lhs = activation(s + u, h);
      const double rhs = std::pow(2.0, h - 1.0) * (activation(s, h) + activation(u, h));
      if (lhs > rhs * (1.0 + 1e-12) + 1e-300) ++bad;
    }
    if (bad) failures.push_back("activation inequality violated " + std::to_string(bad) + "x");
  }

  // Homogeneity of the network and exact margin additivity.
  {
    const XorSpec spec = XorSpec::canonical(40, 12, 0.2, 1.5, 8);
    const Dataset ds = sample_xor(spec, 9);
    Eigen::MatrixXd w(8, 40);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 40; ++j) w(i, j) = rng.normal();
    const TwoLayerNet net = TwoLayerNet::from_weights(w, 1.5);
    double worst = 0.0;
    for (double c : {0.5, 2.0, 10.0}) {
      TwoLayerNet scaled = net;
      scaled.w *= c;
      for (int j = 0; j < ds.n(); ++j) {
        const double f = net.forward(ds.x.col(j));
        const double fc = scaled.forward(ds.x.col(j));
        worst = std::max(worst, std::abs(fc - std::pow(c, 1.5) * f) / std::max(std::abs(fc), 1e-300));
      }
    }
    if (!(worst <= 1e-9)) failures.push_back("homogeneity rel err " + g6(worst));

    const LinearSpec lspec = LinearSpec::canonical(256, 16, 0.25);
    const Dataset lds = sample_linear(lspec, 13);
    const LinearModel good = construct_good(lspec);
    const LinearModel bad = construct_bad(lds, lspec);
    const double gg = linear_margin_report(good, lds).normalized_margin;
    const double gb = (lds.noise.transpose() * bad.w).cwiseProduct(lds.y).minCoeff();
    double worst_add = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double th_ = 0.5 * 3.14159265358979323846 * i / 20.0;
      const double a = std::cos(th_), b = std::sin(th_);
      const LinearModel mix = construct_mixture(a, b, good, bad);
      const double got = linear_margin_report(mix, lds).normalized_margin;
      worst_add = std::max(worst_add, std::abs(got - (a * gg + b * gb)));
    }
    if (!(worst_add <= 1e-12)) failures.push_back("margin additivity err " + g6(worst_add));
    r.detail += ", homogeneity rel err=" + g6(worst) + ", additivity err=" + g6(worst_add);
  }

  // psi and psi_bar are involutions.
  {
    const LinearSpec lspec = LinearSpec::canonical(64, 20, 0.3);
    const Dataset lds = sample_linear(lspec, 21);
    const Dataset pp = opposite_linear(opposite_linear(lds, lspec, LinearOpposite::kPsi), lspec, LinearOpposite::kPsi);
    const Dataset bb =
        opposite_linear(opposite_linear(lds, lspec, LinearOpposite::kPsiBar), lspec, LinearOpposite::kPsiBar);
    const XorSpec xspec = XorSpec::canonical(64, 20, 0.3, 1.5, 4);
    const Dataset xds = sample_xor(xspec, 22);
    const Dataset xx = opposite_xor(opposite_xor(xds, xspec), xspec);
    const bool inv = pp.x == lds.x && bb.x == lds.x && xx.x == xds.x && xx.y == xds.y &&
                     xx.clusters.p_plus == xds.clusters.p_plus && xx.clusters.n_minus == xds.clusters.n_minus;
    if (!inv) failures.push_back("opposite mappings are not involutions");
  }

  r.passed = failures.empty();
  for (const auto& f : failures) r.detail += "; FAIL " + f;
  return r;
}

}  // namespace

bool AcceptanceReport::all_passed() const {
  return !results.empty() &&
         std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.passed; });
}

std::string format_result(const CriterionResult& r) {
  char head[32];
  std::snprintf(head, sizeof head, "%s  %2d  ", r.passed ? "PASS" : "FAIL", r.id);
  std::ostringstream out;
  out << head << r.title << "  (" << r.detail << ")  [" << fmt("%.1f", r.seconds) << " s]";
  return out.str();
}

AcceptanceReport run_acceptance(const AcceptanceOptions& opts) {
  std::set<int> need;
  if (opts.only.empty()) {
    for (int i = 1; i <= 12; ++i) need.insert(i);
  } else {
    for (int i : opts.only) {
      if (i < 1 || i > 12) throw ValidationError("acceptance criteria are numbered 1..12");
      need.insert(i);
    }
  }
  // Criterion 12 hashes every record table, so it needs all of them.
  std::set<int> tables_needed = need;
  if (need.count(12)) tables_needed = {3, 4, 5, 6, 7, 8, 9, 10};

  using clock = std::chrono::steady_clock;
  auto timed = [](auto&& fn) {
    const auto t0 = clock::now();
    CriterionResult r = fn();
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return r;
  };

  AcceptanceReport rep;
  const auto t_collect = clock::now();
  const Tables tables = collect(tables_needed, opts.workers);
  const double collect_s = std::chrono::duration<double>(clock::now() - t_collect).count();
  rep.csvs = tables_to_csv(tables);
  rep.hash = hash_tables(rep.csvs);

  if (need.count(1)) rep.results.push_back(timed(c1_opt5));
  if (need.count(2)) rep.results.push_back(timed(c2_thresholds));
  if (need.count(3)) rep.results.push_back(timed([&] { return c3_solver(tables); }));
  if (need.count(4)) rep.results.push_back(timed([&] { return c4_linear_gen(tables); }));
  if (need.count(5)) rep.results.push_back(timed([&] { return c5_bad_baseline(tables); }));
  if (need.count(6)) rep.results.push_back(timed([&] { return c6_linear_uc(tables); }));
  if (need.count(7)) rep.results.push_back(timed([&] { return c7_vacuity(tables); }));
  if (need.count(8)) rep.results.push_back(timed([&] { return c8_xor_gen(tables); }));
  if (need.count(9)) rep.results.push_back(timed([&] { return c9_xor_nogen(tables); }));
  if (need.count(10)) rep.results.push_back(timed([&] { return c10_xor_uc(tables); }));
  if (need.count(11)) rep.results.push_back(timed(c11_kernels));
  if (need.count(12)) {
    rep.results.push_back(timed([&] {
      CriterionResult r{12, "determinism of record tables across reruns", true, "", 0.0};
      const Tables again = collect(tables_needed, opts.workers);
      const std::uint64_t h2 = hash_tables(tables_to_csv(again));
      r.passed = h2 == rep.hash;
      r.detail = "hash " + hash_hex(rep.hash) + " vs rerun " + hash_hex(h2) + " over " +
                 std::to_string(rep.csvs.size()) + " tables";
      return r;
    }));
  }
  // Record collection time is shared; report it on the table-driven criteria.
  for (auto& r : rep.results)
    if (r.id >= 3 && r.id <= 10) r.seconds += collect_s / 8.0;
  return rep;
}

}  // namespace marginlab
