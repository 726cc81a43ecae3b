#include "marginlab/linear_margin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {
namespace {

constexpr int kRefreshEvery = 10;

void check_linear(const Dataset& ds) {
  if (ds.problem != Problem::kLinear) throw ValidationError("expected a linear dataset");
  if (ds.n() < 1) throw ValidationError("dataset is empty");
}

void fisher_yates(std::vector<int>& idx, CounterRng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

LinearModel LinearModel::from_raw(const Eigen::VectorXd& raw) {
  const double norm = raw.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("cannot normalize a zero or non-finite weight vector");
  }
  return LinearModel{raw / norm};
}

TaggedRatio TaggedRatio::of(double num, double den) {
  if (den == 0.0) {
    if (num == 0.0) return {0.0, false};
    return {num > 0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity(),
            true};
  }
  return {num / den, false};
}

SolverResult solve_max_margin(const Dataset& ds, const SolverOptions& opts) {
  check_linear(ds);
  const int n = ds.n();
  // Q = diag(y) X'X diag(y).
  Eigen::MatrixXd q = ds.x.transpose() * ds.x;
  q = ds.y.asDiagonal() * q * ds.y.asDiagonal();
  for (int j = 0; j < n; ++j) {
    if (!(q(j, j) > 0.0)) throw ValidationError("dataset contains a zero sample");
  }

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);  // Q alpha
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  CounterRng rng = CounterRng(opts.seed).substream(stream_tag::kSolver);

  double best_gap = std::numeric_limits<double>::infinity();
  double primal = 0.0, dual = 0.0, s = 0.0, quad = 0.0;
  int epoch = 0;
  bool converged = false;
  for (; epoch < opts.max_epochs; ++epoch) {
    fisher_yates(order, rng);
    for (int j : order) {
      const double next = std::max(0.0, alpha[j] + (1.0 - g[j]) / q(j, j));
      const double delta = next - alpha[j];
      if (delta != 0.0) {
        g.noalias() += delta * q.col(j);
        alpha[j] = next;
      }
    }
    if ((epoch + 1) % kRefreshEvery == 0) g.noalias() = q * alpha;

    s = g.minCoeff();
    if (!(s > 0.0)) continue;
    quad = alpha.dot(g);
    dual = alpha.sum() - 0.5 * quad;
    primal = 0.5 * quad / (s * s);
    const double gap = (primal - dual) / primal;
    best_gap = std::min(best_gap, gap);
    if (gap <= opts.gap_tol) {
      converged = true;
      ++epoch;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "max-margin solver hit the epoch cap (" << opts.max_epochs << ") with relative gap "
        << best_gap;
    throw SolverError(msg.str(), best_gap);
  }

  // Exact recomputation for the reported quantities.
  g.noalias() = q * alpha;
  s = g.minCoeff();
  quad = alpha.dot(g);
  dual = alpha.sum() - 0.5 * quad;
  primal = 0.5 * quad / (s * s);

  SolverResult out;
  out.alpha = alpha;
  out.span_coef = alpha.cwiseProduct(ds.y) / s;
  out.model = LinearModel::from_raw(ds.x * out.span_coef);
  out.primal = primal;
  out.dual = dual;
  out.duality_gap = (primal - dual) / primal;
  double kkt = 0.0;
  for (int j = 0; j < n; ++j) {
    kkt = std::max(kkt, alpha[j] * std::abs(g[j] - 1.0));
    kkt = std::max(kkt, 1.0 - g[j]);
  }
  out.kkt_residual = kkt;
  out.gamma_dual = 1.0 / std::sqrt(2.0 * dual);
  out.epochs = epoch;
  out.report = linear_margin_report(out.model, ds);
  out.gamma_star = out.report.min_margin;
  attach_reference(out.report, out.gamma_star);
  return out;
}

MarginReport linear_margin_report(const LinearModel& model, const Dataset& ds,
                                  double gamma_star) {
  MarginReport r;
  const double norm = model.w.norm();
  r.per_sample = (ds.x.transpose() * model.w).cwiseProduct(ds.y);
  r.min_margin = r.per_sample.size() ? r.per_sample.minCoeff() : 0.0;
  r.zero_norm = norm == 0.0;
  r.normalized_margin = r.zero_norm ? 0.0 : r.min_margin / norm;
  if (!std::isnan(gamma_star)) attach_reference(r, gamma_star);
  return r;
}

double empirical_error(const LinearModel& model, const Dataset& ds) {
  const Eigen::VectorXd m = (ds.x.transpose() * model.w).cwiseProduct(ds.y);
  return mean_zero_one_loss(m);
}

LinearModel construct_good(const LinearSpec& spec) {
  spec.validate();
  return LinearModel{spec.mu};
}

LinearModel construct_bad(const Dataset& ds, const LinearSpec& spec) {
  check_linear(ds);
  if (ds.d() != spec.d) throw ValidationError("dataset dimension does not match spec");
  return LinearModel::from_raw(min_norm_solve(ds.noise, ds.y));
}

LinearModel construct_mixture(double alpha, double beta, const LinearModel& good,
                              const LinearModel& bad) {
  if (alpha == 0.0 && beta == 0.0) throw ValidationError("mixture weights are both zero");
  if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-9) {
    throw ValidationError("mixture weights must satisfy alpha^2 + beta^2 = 1");
  }
  return LinearModel::from_raw(alpha * good.w + beta * bad.w);
}

MixtureOptimum optimal_mixture(double gamma_g, double gamma_b) {
  if (gamma_g < 0.0 || gamma_b < 0.0) throw ValidationError("mixture margins must be >= 0");
  const double norm = std::hypot(gamma_g, gamma_b);
  if (norm == 0.0) throw ValidationError("mixture margins are both zero");
  return {gamma_g / norm, gamma_b / norm, norm};
}

LinearDecomposition decompose(const LinearModel& model, const LinearSpec& spec) {
  if (model.w.size() != spec.d) throw ValidationError("model dimension does not match spec");
  LinearDecomposition out;
  const double along = spec.mu.dot(model.w);
  out.u = along * spec.mu;
  out.v = model.w - out.u;
  out.q = TaggedRatio::of(along, out.v.norm());
  return out;
}

LinearTestError test_error(const LinearModel& model, const LinearSpec& spec, int mc_samples,
                           std::uint64_t seed) {
  if (mc_samples < 1) throw ValidationError("mc_samples must be >= 1");
  spec.validate();
  const CounterRng root = CounterRng(seed).substream(stream_tag::kTestDraws);
  Eigen::VectorXd x(spec.d);
  double errors = 0.0;
  for (int i = 0; i < mc_samples; ++i) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(i));
    const double y = draw_linear(spec, rng, x);
    errors += zero_one_loss(y * model.w.dot(x));
  }

  LinearTestError out;
  out.samples = mc_samples;
  out.empirical = errors / mc_samples;
  const TaggedRatio q = decompose(model, spec).q;
  const double tail = std::exp(-spec.d / 8.0);
  if (q.infinite && q.value > 0) {
    out.analytic_bound = tail;
  } else if (q.value <= 0.0) {
    out.analytic_bound = 1.0;
  } else {
    out.analytic_bound = 2.0 * std::exp(-q.value * q.value / (8.0 * spec.sigma * spec.sigma)) + tail;
  }
  return out;
}

TechLemmaRecord tech_lemma_diagnostics(const LinearModel& model, const Dataset& ds,
                                       const LinearSpec& spec) {
  check_linear(ds);
  const LinearDecomposition dec = decompose(model, spec);
  TechLemmaRecord out;
  const double sk = std::sqrt(spec.kappa());
  out.q_over_sqrt_kappa = dec.q.infinite ? dec.q : TaggedRatio{dec.q.value / sk, false};
  out.w_dot_mu = spec.mu.dot(model.w);
  out.min_noise_margin = (ds.noise.transpose() * dec.v).cwiseProduct(ds.y).minCoeff();
  if (out.w_dot_mu <= 0.0) {
    out.signal_nonpositive = true;
  } else {
    out.noise_signal_ratio = out.min_noise_margin / out.w_dot_mu;
  }
  return out;
}

SpanBoundRecord span_bound(const Dataset& ds, const Eigen::VectorXd& coef,
                           const LinearSpec& spec) {
  check_linear(ds);
  if (coef.size() != ds.n()) throw ValidationError("span coefficients must have length n");
  const Eigen::VectorXd w = ds.x * coef;
  const double wnorm = w.norm();
  if (!(wnorm > 0.0)) throw ValidationError("span combination is the zero vector");
  const Eigen::VectorXd yhat = ds.x.transpose() * w;
  const double n = ds.n();
  const double d = spec.d;
  const double s2 = spec.sigma * spec.sigma;

  SpanBoundRecord out;
  out.delta = gram_deviation(ds.noise, spec.sigma, spec.d).spectral_norm_dev;
  const double ynorm = ds.y.norm();
  out.mu_dot_lower_bound =
      (ds.y.dot(yhat) - 2.0 * out.delta * spec.sigma * std::sqrt(d) * ynorm * wnorm) /
      (s2 * d + ynorm * ynorm);
  out.mu_dot_measured = spec.mu.dot(w);
  out.avg_margin = ds.y.dot(yhat) / (n * wnorm);
  const double kappa = spec.kappa();
  const double shrink = std::min(1.0, 1.0 / (kappa * kappa));
  out.loss_bound = 2.0 * std::exp(-shrink * out.avg_margin * out.avg_margin / (8.0 * s2));
  out.vacuous = out.mu_dot_lower_bound <= 0.0;
  return out;
}

SpanBoundRecord span_bound_for(const Dataset& ds, const Eigen::VectorXd& w,
                               const LinearSpec& spec) {
  check_linear(ds);
  if (w.size() != ds.d()) throw ValidationError("weight dimension does not match dataset");
  const Eigen::VectorXd coef = ds.x.colPivHouseholderQr().solve(w);
  const double resid = (ds.x * coef - w).norm() / std::max(w.norm(), 1e-300);
  if (resid > 1e-6) {
    std::ostringstream msg;
    msg << "weight vector is not in the span of the samples (relative residual " << resid << ")";
    throw ValidationError(msg.str());
  }
  return span_bound(ds, coef, spec);
}

}  // namespace marginlab
