#include "marginlab/opt_chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {
namespace {

constexpr double kBracketLo = 1e-6;
constexpr double kBracketHi = 4.0;
constexpr double kPi = 3.14159265358979323846;

void check_h(double h) {
  if (!(h >= 1.0 && h < 2.0)) throw ValidationError("activation exponent must lie in [1, 2)");
}

void check_opt5_args(double k, double p5, double h) {
  if (!(k > 0.0) || !(p5 > 0.0)) throw ValidationError("trivariate program needs k > 0 and P5 > 0");
  check_h(h);
}

TrivariatePoint make_point(double b, double c, double d, double k, double p5, double h) {
  TrivariatePoint pt;
  pt.b = b;
  pt.c = c;
  pt.d = d;
  pt.k = k;
  pt.p5 = p5;
  pt.h = h;
  pt.objective = opt5_objective(b, c, d, h);
  return pt;
}

// Scales (b, c, d) onto the constraint surface.
void to_surface(double& b, double& c, double& d, double k, double p5) {
  const double g = b * b + k * (c * c + d * d);
  if (g <= 0.0) return;
  const double s = std::sqrt(p5 / g);
  b *= s;
  c *= s;
  d *= s;
}

}  // namespace

Thresholds Thresholds::for_h(double h) {
  Thresholds t;
  t.kappa_gen_xor = marginlab::kappa_gen_xor(h);
  return t;
}

double threshold_residual(double kappa, double h) {
  return std::pow(2.0, 1.0 / h) * std::sqrt(2.0 / kappa) - std::sqrt(kappa / (4.0 + kappa)) -
         std::sqrt(16.0 / (kappa * (4.0 + kappa)));
}

double kappa_gen_xor(double h) {
  check_h(h);
  double lo = kBracketLo;
  double hi = kBracketHi;
  const double f_lo = threshold_residual(lo, h);
  const double f_hi = threshold_residual(hi, h);
  // At h = 1 the root is the bracket endpoint itself.
  if (std::abs(f_hi) <= 1e-12) return hi;
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    std::ostringstream msg;
    msg << "threshold residual does not change sign on the bracket (f(lo)=" << f_lo
        << ", f(hi)=" << f_hi << ")";
    throw StructuralError(msg.str());
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (threshold_residual(mid, h) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(threshold_residual(lo, h)) < std::abs(threshold_residual(hi, h)) ? lo : hi;
}

double gamma_0(double kappa, double h) {
  if (!(kappa > 0.0)) throw ValidationError("gamma_0 requires kappa > 0");
  return 2.0 * activation(std::sqrt(2.0 / kappa), h);
}

double gamma_star(double kappa, double h) {
  if (!(kappa > 0.0)) throw ValidationError("gamma_star requires kappa > 0");
  return activation(std::sqrt(kappa / (4.0 + kappa)) + std::sqrt(16.0 / (kappa * (4.0 + kappa))),
                    h);
}

Region classify_region(Problem problem, double kappa, double h) {
  double gen, uc;
  if (problem == Problem::kLinear) {
    const Thresholds t;
    gen = t.kappa_gen_linear;
    uc = t.kappa_uc_linear;
  } else {
    const Thresholds t = Thresholds::for_h(h);
    gen = t.kappa_gen_xor;
    uc = t.kappa_uc_xor;
  }
  if (kappa < gen) return Region::kNoGeneralization;
  if (kappa < uc) return Region::kGeneralizationNoUc;
  return Region::kUniformConvergence;
}

std::string region_name(Region region) {
  switch (region) {
    case Region::kNoGeneralization: return "no_gen";
    case Region::kGeneralizationNoUc: return "gen_no_uc";
    case Region::kUniformConvergence: return "uc";
  }
  return "unknown";
}

double opt5_objective(double b, double c, double d, double h) {
  return 0.25 * (activation(b + c, h) + activation(-b + d, h));
}

TrivariatePoint solve_opt5_without_signal(double k, double p5, double h) {
  check_opt5_args(k, p5, h);
  const double cd = std::sqrt(p5 / (2.0 * k));
  return make_point(0.0, cd, cd, k, p5, h);
}

TrivariatePoint solve_opt5(double k, double p5, double h) {
  check_opt5_args(k, p5, h);
  const double k_switch = kappa_gen_xor(h) / 4.0;
  const bool boundary = std::abs(k - k_switch) <= 1e-12 * std::max(1.0, k_switch);
  if (k < k_switch && !boundary) return solve_opt5_without_signal(k, p5, h);
  const double b = std::sqrt(p5 * k / (1.0 + k));
  const double c = std::sqrt(p5 / (k * (1.0 + k)));
  TrivariatePoint pt = make_point(b, c, 0.0, k, p5, h);
  pt.boundary = boundary;
  return pt;
}

TrivariatePoint canonicalize(TrivariatePoint pt) {
  if (pt.b < 0.0) {
    pt.b = -pt.b;
    std::swap(pt.c, pt.d);
  }
  return pt;
}

TrivariatePoint opt5_oracle(double k, double p5, double h, int grid) {
  check_opt5_args(k, p5, h);
  if (grid < 50) throw ValidationError("oracle grid must be at least 50");
  const double rb = std::sqrt(p5);
  const double rc = std::sqrt(p5 / k);

  // Grid over the ellipsoid surface, which contains the optimum by homogeneity.
  double best = -1.0, bb = 0.0, bc = 0.0, bd = 0.0;
  const int n_phi = 2 * grid;
  for (int i = 0; i <= grid; ++i) {
    const double theta = kPi * i / grid;
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * kPi * j / n_phi;
      const double b = rb * std::cos(theta);
      const double c = rc * std::sin(theta) * std::cos(phi);
      const double d = rc * std::sin(theta) * std::sin(phi);
      const double val = opt5_objective(b, c, d, h);
      if (val > best) {
        best = val;
        bb = b;
        bc = c;
        bd = d;
      }
    }
  }

  // Projected-gradient polish: tangent step, then rescale onto the surface.
  double step = 0.1 * std::sqrt(p5 / std::min(1.0, k));
  for (int it = 0; it < 20000 && step > 1e-15; ++it) {
    const double g1 = activation_grad(bb + bc, h);
    const double g2 = activation_grad(-bb + bd, h);
    double gb = 0.25 * (g1 - g2), gc = 0.25 * g1, gd = 0.25 * g2;
    const double nb = bb, nc = k * bc, nd = k * bd;
    const double nn = nb * nb + nc * nc + nd * nd;
    if (nn > 0.0) {
      const double proj = (gb * nb + gc * nc + gd * nd) / nn;
      gb -= proj * nb;
      gc -= proj * nc;
      gd -= proj * nd;
    }
    const double gn = std::sqrt(gb * gb + gc * gc + gd * gd);
    if (gn < 1e-16) break;
    double tb = bb + step * gb / gn, tc = bc + step * gc / gn, td = bd + step * gd / gn;
    to_surface(tb, tc, td, k, p5);
    const double val = opt5_objective(tb, tc, td, h);
    if (val > best) {
      best = val;
      bb = tb;
      bc = tc;
      bd = td;
      step *= 1.2;
    } else {
      step *= 0.5;
    }
  }
  return make_point(bb, bc, bd, k, p5, h);
}

TrivariateRatios trivariate_ratios(const TrivariatePoint& pt, double h) {
  TrivariateRatios r;
  const double den_b = activation(pt.b + pt.c, h);
  const double den_d = activation(-pt.b + pt.d, h);
  if (den_b > 0.0) {
    r.b_side = activation(pt.b, h) / den_b;
  } else {
    r.b_side_defined = false;
    r.b_side = std::numeric_limits<double>::quiet_NaN();
  }
  if (den_d > 0.0) {
    r.d_side = activation(-pt.b, h) / den_d;
  } else {
    r.d_side_defined = false;
    r.d_side = std::numeric_limits<double>::quiet_NaN();
  }
  const double kappa_hat = 4.0 * pt.k;
  r.reference = std::pow(1.0 / (1.0 + 4.0 / kappa_hat), h);
  return r;
}

std::string ConstructMode::name() const {
  switch (kind) {
    case Kind::kOptimal: return "optimal";
    case Kind::kNoGen: return "no_gen";
    case Kind::kScaled: {
      std::ostringstream s;
      s << "scaled(" << alpha << ")";
      return s.str();
    }
  }
  return "unknown";
}

Construction construct_network(const Dataset& ds, const XorSpec& spec, ConstructMode mode) {
  spec.validate();
  if (ds.problem != Problem::kXor || ds.d() != spec.d) {
    throw ValidationError("construct_network expects an XOR dataset matching the spec");
  }
  const int n_min = ds.clusters.min_size();
  if (n_min == 0) throw ValidationError("construct_network: a cluster is empty");

  Construction out;
  out.n_min = n_min;
  out.kappa_hat = 4.0 * n_min / (spec.d * spec.sigma * spec.sigma);
  const double k = out.kappa_hat / 4.0;
  const double p5 = 1.0;

  TrivariatePoint pt;
  switch (mode.kind) {
    case ConstructMode::Kind::kOptimal: pt = solve_opt5(k, p5, spec.h); break;
    case ConstructMode::Kind::kNoGen: pt = solve_opt5_without_signal(k, p5, spec.h); break;
    case ConstructMode::Kind::kScaled: {
      if (!(mode.alpha >= 0.0 && mode.alpha <= 1.0)) {
        throw ValidationError("scaled construction needs alpha in [0, 1]");
      }
      pt = solve_opt5(k, p5, spec.h);
      const double b = mode.alpha * pt.b;
      const double rest = pt.c * pt.c + pt.d * pt.d;
      const double s = rest > 0.0 ? std::sqrt((p5 - b * b) / (k * rest)) : 0.0;
      pt = make_point(b, s * pt.c, s * pt.d, k, p5, spec.h);
      break;
    }
  }
  out.point = pt;

  const int m = spec.m;
  const int half = m / 2;
  const int quarter = m / 4;
  const int n = ds.n();

  // Noise targets: columns 0/1 serve H+ neurons of the (b,c,d) and (-b,d,c)
  // halves, columns 2/3 the same for H-.
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, 4);
  for (int j : ds.clusters.p_plus) {
    targets(j, 0) = pt.c;
    targets(j, 1) = pt.d;
  }
  for (int j : ds.clusters.p_minus) {
    targets(j, 0) = pt.d;
    targets(j, 1) = pt.c;
  }
  for (int j : ds.clusters.n_plus) {
    targets(j, 2) = pt.c;
    targets(j, 3) = pt.d;
  }
  for (int j : ds.clusters.n_minus) {
    targets(j, 2) = pt.d;
    targets(j, 3) = pt.c;
  }
  const MinNormSolver solver(ds.noise);
  out.gram_condition = solver.condition_number();
  out.ill_conditioned = solver.ill_conditioned();
  const Eigen::MatrixXd v = solver.solve_many(targets);

  Eigen::MatrixXd w(m, spec.d);
  for (int i = 0; i < m; ++i) {
    const bool plus = i < half;
    const bool flipped = (i % half) >= quarter;
    const double sb = flipped ? -pt.b : pt.b;
    const int col = (plus ? 0 : 2) + (flipped ? 1 : 0);
    w.row(i) = (sb * (plus ? spec.mu1 : spec.mu2) + v.col(col)).transpose();
  }
  out.net = TwoLayerNet::from_weights(std::move(w), spec.h).normalized();
  return out;
}

OppositeAudit opposite_margin_audit(const TwoLayerNet& net, const Dataset& ds, const XorSpec& spec,
                                    int mc_samples, std::uint64_t seed) {
  OppositeAudit out;
  const Dataset psi = opposite_xor(ds, spec);
  out.margin_s = normalized_margin(net, ds).normalized_margin;
  out.margin_psi_s = normalized_margin(net, psi).normalized_margin;
  out.margin_ratio = out.margin_s != 0.0 ? out.margin_psi_s / out.margin_s
                                         : std::numeric_limits<double>::quiet_NaN();
  out.error_psi_s = empirical_error(net, psi);
  out.error_psi_d = xor_test_error(net, spec.swapped(), mc_samples,
                                   CounterRng::mix(seed ^ stream_tag::kOppositeDraws));
  return out;
}

}  // namespace marginlab
