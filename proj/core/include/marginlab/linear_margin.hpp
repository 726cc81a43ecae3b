#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Dense>

#include "marginlab/margin.hpp"
#include "marginlab/synthdata.hpp"

namespace marginlab {

/// Unit-norm linear classifier x -> w'x.
struct LinearModel {
  Eigen::VectorXd w;

  /// Normalizes `raw`; throws ValidationError on a zero vector.
  static LinearModel from_raw(const Eigen::VectorXd& raw);
  double score(const Eigen::VectorXd& x) const { return w.dot(x); }
};

/// A ratio that may be +infinity, kept as a tag instead of a float division.
struct TaggedRatio {
  double value = 0.0;
  bool infinite = false;

  static TaggedRatio inf() { return {std::numeric_limits<double>::infinity(), true}; }
  static TaggedRatio of(double num, double den);
};

struct LinearDecomposition {
  Eigen::VectorXd u;  // mu mu' w
  Eigen::VectorXd v;  // (I - mu mu') w
  TaggedRatio q;      // u'mu / ||v||
};

struct SolverOptions {
  double gap_tol = 1e-8;
  int max_epochs = 200000;
  std::uint64_t seed = 0;
};

struct SolverResult {
  LinearModel model;
  MarginReport report;
  Eigen::VectorXd alpha;       // dual variables, >= 0
  Eigen::VectorXd span_coef;   // w_raw = X span_coef
  double primal = 0.0;
  double dual = 0.0;
  double duality_gap = 0.0;    // (primal - dual) / primal
  double kkt_residual = 0.0;
  double gamma_star = 0.0;     // primal margin of the returned unit model
  double gamma_dual = 0.0;     // 1 / ||w_raw|| from the dual objective
  int epochs = 0;
};

/// Hard-margin separator through the origin via dual coordinate ascent.
/// Throws SolverError when the gap certificate is not reached.
SolverResult solve_max_margin(const Dataset& ds, const SolverOptions& opts = {});

/// Margins of a unit model on a dataset; `gamma_star` fills the ratio when known.
MarginReport linear_margin_report(const LinearModel& model, const Dataset& ds,
                                  double gamma_star = std::numeric_limits<double>::quiet_NaN());

/// Mean 0/1 loss on the dataset (ties cost 1/2).
double empirical_error(const LinearModel& model, const Dataset& ds);

LinearModel construct_good(const LinearSpec& spec);
/// Normalized min-norm w with xi_j' w = y_j.
LinearModel construct_bad(const Dataset& ds, const LinearSpec& spec);
LinearModel construct_mixture(double alpha, double beta, const LinearModel& good,
                              const LinearModel& bad);

struct MixtureOptimum {
  double alpha = 0.0;
  double beta = 0.0;
  double margin = 0.0;
};

/// max alpha g + beta b subject to alpha^2 + beta^2 <= 1.
MixtureOptimum optimal_mixture(double gamma_g, double gamma_b);

LinearDecomposition decompose(const LinearModel& model, const LinearSpec& spec);

struct LinearTestError {
  double empirical = 0.0;
  double analytic_bound = 1.0;
  int samples = 0;
};

LinearTestError test_error(const LinearModel& model, const LinearSpec& spec, int mc_samples,
                           std::uint64_t seed);

struct TechLemmaRecord {
  TaggedRatio q_over_sqrt_kappa;
  /// min_j y_j v'xi_j / w'mu; NaN when w'mu <= 0.
  double noise_signal_ratio = std::numeric_limits<double>::quiet_NaN();
  bool signal_nonpositive = false;
  double w_dot_mu = 0.0;
  double min_noise_margin = 0.0;
};

TechLemmaRecord tech_lemma_diagnostics(const LinearModel& model, const Dataset& ds,
                                       const LinearSpec& spec);

struct SpanBoundRecord {
  double mu_dot_lower_bound = 0.0;
  double mu_dot_measured = 0.0;
  double avg_margin = 0.0;     // E_j y_j w'x_j / ||w||
  double loss_bound = 1.0;
  double delta = 0.0;          // ||I - Xi'Xi/(sigma^2 d)||_2
  bool vacuous = false;        // lower bound <= 0
};

/// w = X a for the supplied coefficients.
SpanBoundRecord span_bound(const Dataset& ds, const Eigen::VectorXd& coef, const LinearSpec& spec);
/// Recovers coefficients by least squares; throws ValidationError when w is
/// not in the span of the samples (relative residual > 1e-6).
SpanBoundRecord span_bound_for(const Dataset& ds, const Eigen::VectorXd& w, const LinearSpec& spec);

}  // namespace marginlab
