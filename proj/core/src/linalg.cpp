#include "marginlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "marginlab/errors.hpp"

namespace marginlab {
namespace {

constexpr int kDirectEigenMaxN = 64;
constexpr double kPowerTol = 1e-8;

double spectral_norm_direct(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

// Power iteration on a symmetric matrix. Returns a negative value when the
// iteration cap is hit before the estimate settles.
double spectral_norm_power(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  // Fixed, non-degenerate start so the result is deterministic.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
  v.normalize();
  double est = 0.0;
  const int cap = static_cast<int>(10 * n);
  for (int it = 0; it < cap; ++it) {
    // Iterate with m^2 so +-lambda pairs do not make the estimate oscillate.
    Eigen::VectorXd w = m * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    Eigen::VectorXd w2 = m * w;
    const double n2 = w2.norm();
    const double next = std::sqrt(n2);
    v = w2 / n2;
    if (std::abs(next - est) <= kPowerTol * next) return next;
    est = next;
  }
  return -1.0;
}

}  // namespace

GramDeviation gram_deviation(const Eigen::MatrixXd& xi, double sigma, int d_prime,
                             double bound_constant) {
  const Eigen::Index n = xi.cols();
  if (n < 1) throw ValidationError("gram_deviation requires at least one column");
  if (!(sigma > 0.0)) throw ValidationError("gram_deviation requires sigma > 0");
  if (d_prime < 1) throw ValidationError("gram_deviation requires d_prime >= 1");

  Eigen::MatrixXd dev = xi.transpose() * xi / (sigma * sigma * d_prime);
  dev.diagonal().array() -= 1.0;

  double norm;
  if (n <= kDirectEigenMaxN) {
    norm = spectral_norm_direct(dev);
  } else {
    norm = spectral_norm_power(dev);
    if (norm < 0.0) norm = spectral_norm_direct(dev);
  }

  GramDeviation out;
  out.spectral_norm_dev = norm;
  out.d_prime = d_prime;
  const double scale = std::sqrt(static_cast<double>(n) / d_prime);
  out.bound_rhs = bound_constant * scale;
  out.ratio = norm / scale;
  return out;
}

MinNormSolver::MinNormSolver(const Eigen::MatrixXd& xi) : xi_(xi), gram_(xi.transpose() * xi) {
  if (xi.cols() < 1) throw ValidationError("min-norm solve requires at least one column");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  const double floor = std::numeric_limits<double>::epsilon() * std::max(hi, 1e-300) *
                       static_cast<double>(gram_.rows());
  if (!(lo > floor)) {
    std::ostringstream msg;
    msg << "noise Gram matrix is singular (smallest eigenvalue " << lo << ")";
    throw SingularGramError(msg.str(), lo);
  }
  cond_ = hi / lo;
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Cholesky factorization failed (smallest eigenvalue " << lo << ")";
    throw SingularGramError(msg.str(), lo);
  }
}

Eigen::MatrixXd MinNormSolver::solve_many(const Eigen::MatrixXd& targets) const {
  if (targets.rows() != gram_.rows()) {
    throw ValidationError("min-norm solve: target length does not match column count");
  }
  Eigen::MatrixXd coef = llt_.solve(targets);
  // One round of refinement keeps the residual near rounding level even for
  // moderately conditioned Gram matrices.
  const Eigen::MatrixXd resid = targets - gram_ * coef;
  coef += llt_.solve(resid);
  return xi_ * coef;
}

Eigen::VectorXd MinNormSolver::solve(const Eigen::VectorXd& c) const {
  return solve_many(c);
}

Eigen::VectorXd min_norm_solve(const Eigen::MatrixXd& xi, const Eigen::VectorXd& c) {
  return MinNormSolver(xi).solve(c);
}

}  // namespace marginlab
