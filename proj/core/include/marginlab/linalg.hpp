#pragma once

#include <Eigen/Dense>

namespace marginlab {

/// Spectral deviation of the normalized noise Gram matrix from the identity.
struct GramDeviation {
  double spectral_norm_dev = 0.0;  // ||Xi'Xi / (sigma^2 d') - I||_2
  int d_prime = 0;
  double bound_rhs = 0.0;          // C * sqrt(n / d')
  double ratio = 0.0;              // spectral_norm_dev / sqrt(n / d')
};

/// `bound_constant` is only used for `bound_rhs`; nothing is tested against it.
GramDeviation gram_deviation(const Eigen::MatrixXd& xi, double sigma, int d_prime,
                             double bound_constant = 1.0);

/// Minimum-norm solutions of Xi' v = c through a Cholesky factor of the n x n
/// Gram matrix. Factor once, solve for as many right-hand sides as needed.
class MinNormSolver {
 public:
  static constexpr double kIllConditioned = 1e10;

  /// Throws SingularGramError when Xi'Xi is not numerically positive definite.
  explicit MinNormSolver(const Eigen::MatrixXd& xi);

  Eigen::VectorXd solve(const Eigen::VectorXd& c) const;
  /// Column-wise solve: returns a d x k matrix for an n x k target block.
  Eigen::MatrixXd solve_many(const Eigen::MatrixXd& targets) const;

  double condition_number() const { return cond_; }
  bool ill_conditioned() const { return cond_ > kIllConditioned; }
  int n() const { return static_cast<int>(gram_.rows()); }

 private:
  Eigen::MatrixXd xi_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double cond_ = 1.0;
};

/// v = Xi (Xi'Xi)^{-1} c.
Eigen::VectorXd min_norm_solve(const Eigen::MatrixXd& xi, const Eigen::VectorXd& c);

/// phi(z) = max(0, z)^h.
inline double activation(double z, double h);
/// h max(0, z)^{h-1}; zero for z <= 0.
inline double activation_grad(double z, double h);

}  // namespace marginlab

#include <cmath>

namespace marginlab {

inline double activation(double z, double h) {
  if (z <= 0.0) return 0.0;
  return h == 1.0 ? z : std::pow(z, h);
}

inline double activation_grad(double z, double h) {
  if (z <= 0.0) return 0.0;
  return h == 1.0 ? 1.0 : h * std::pow(z, h - 1.0);
}

}  // namespace marginlab
