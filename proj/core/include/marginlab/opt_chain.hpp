#pragma once

#include <cstdint>
#include <string>

#include "marginlab/linear_margin.hpp"
#include "marginlab/synthdata.hpp"
#include "marginlab/xor_net.hpp"

namespace marginlab {

/// Regime thresholds in kappa = n / (d sigma^2).
struct Thresholds {
  double kappa_gen_linear = 0.0;
  double kappa_uc_linear = 1.0;
  double kappa_uc_xor = 4.0;
  double kappa_gen_xor = 4.0;

  static Thresholds for_h(double h);
};

/// 2^{1/h} sqrt(2/k) - sqrt(k/(4+k)) - sqrt(16/(k(4+k))); its root is kappa_gen.
double threshold_residual(double kappa, double h);
/// Root of threshold_residual on (1e-6, 4] by bisection.
double kappa_gen_xor(double h);

/// 2 phi(sqrt(2/kappa)): best margin scale without the signal coordinate.
double gamma_0(double kappa, double h);
/// phi(sqrt(kappa/(4+kappa)) + sqrt(16/(kappa(4+kappa)))): best margin scale using it.
double gamma_star(double kappa, double h);

enum class Region { kNoGeneralization, kGeneralizationNoUc, kUniformConvergence };

Region classify_region(Problem problem, double kappa, double h);
std::string region_name(Region region);

/// A point of the trivariate program
///   max (1/4)(phi(b + c) + phi(-b + d))  s.t.  b^2 + k (c^2 + d^2) <= P5.
struct TrivariatePoint {
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double k = 0.0;
  double p5 = 1.0;
  double h = 1.5;
  double objective = 0.0;
  bool boundary = false;  // k sits on kappa_gen / 4 within rounding

  double constraint() const { return b * b + k * (c * c + d * d); }
};

double opt5_objective(double b, double c, double d, double h);

/// Closed-form optimum. Above kappa_gen/4 the b > 0 branch (d = 0), below it
/// the b = 0 branch (c = d).
TrivariatePoint solve_opt5(double k, double p5, double h);
/// The b = 0 branch regardless of k.
TrivariatePoint solve_opt5_without_signal(double k, double p5, double h);
/// Brute-force grid over the constraint ellipsoid plus projected-gradient polish.
TrivariatePoint opt5_oracle(double k, double p5, double h, int grid);
/// Maps b < 0 points to (-b, d, c), which has the same objective.
TrivariatePoint canonicalize(TrivariatePoint pt);

struct TrivariateRatios {
  double b_side = 0.0;       // phi(b) / phi(b + c)
  bool b_side_defined = true;
  double d_side = 0.0;       // phi(-b) / phi(-b + d)
  bool d_side_defined = true;
  double reference = 0.0;    // (1 / (1 + 4 / kappa_hat))^h
};

TrivariateRatios trivariate_ratios(const TrivariatePoint& pt, double h);

struct ConstructMode {
  enum class Kind { kOptimal, kNoGen, kScaled };
  Kind kind = Kind::kOptimal;
  double alpha = 1.0;  // used by kScaled

  static ConstructMode optimal() { return {Kind::kOptimal, 1.0}; }
  static ConstructMode no_gen() { return {Kind::kNoGen, 0.0}; }
  static ConstructMode scaled(double alpha) { return {Kind::kScaled, alpha}; }
  std::string name() const;
};

struct Construction {
  TwoLayerNet net;          // unit norm
  TrivariatePoint point;    // the trivariate solution that was realized
  double kappa_hat = 0.0;   // 4 n_min / (d sigma^2)
  int n_min = 0;
  double gram_condition = 0.0;
  bool ill_conditioned = false;
};

/// Builds an explicit network from a trivariate solution: half of each sign
/// group gets (b, c, d), the other half (-b, d, c); signal rows are b mu1 (H+)
/// or b mu2 (H-), and noise rows are min-norm vectors hitting c on one
/// own-sign cluster, d on the other, and 0 on the opposite-sign clusters.
Construction construct_network(const Dataset& ds, const XorSpec& spec, ConstructMode mode);

struct OppositeAudit {
  double margin_s = 0.0;
  double margin_psi_s = 0.0;
  double margin_ratio = 0.0;  // margin on psi(S) / margin on S
  double error_psi_s = 0.0;
  double error_psi_d = 0.0;
};

OppositeAudit opposite_margin_audit(const TwoLayerNet& net, const Dataset& ds, const XorSpec& spec,
                                    int mc_samples, std::uint64_t seed);

}  // namespace marginlab
