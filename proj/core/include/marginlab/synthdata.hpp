#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "marginlab/rng.hpp"

namespace marginlab {

enum class Problem : std::uint8_t { kLinear = 0, kXor = 1 };

/// Signal component z_j of a sample. Linear data only uses the first two
/// (z = +mu or -mu); XOR data uses all four.
enum class SignalTag : std::uint8_t {
  kPlusMu1 = 0,
  kMinusMu1 = 1,
  kPlusMu2 = 2,
  kMinusMu2 = 3,
};

/// Linear problem: x = y mu + xi, xi uniform on the radius sqrt(d-1) sigma
/// sphere orthogonal to mu.
struct LinearSpec {
  Eigen::VectorXd mu;
  double sigma = 0.0;
  int d = 0;
  int n = 0;

  /// mu = e_1.
  static LinearSpec canonical(int d, int n, double sigma);
  /// sigma derived from kappa = n / (d sigma^2).
  static LinearSpec from_kappa(int d, int n, double kappa);

  double kappa() const { return n / (d * sigma * sigma); }
  void validate() const;
};

/// XOR problem: x = z + xi with z in {+-mu1, +-mu2}, y = (mu1'x)^2 - (mu2'x)^2,
/// learned by a width-m relu^h network.
struct XorSpec {
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu2;
  double sigma = 0.0;
  int d = 0;
  int n = 0;
  double h = 1.5;
  int m = 4;

  /// mu1 = e_1, mu2 = e_2.
  static XorSpec canonical(int d, int n, double sigma, double h, int m);
  static XorSpec from_kappa(int d, int n, double kappa, double h, int m);

  double kappa() const { return n / (d * sigma * sigma); }
  /// The same spec with mu1 and mu2 exchanged: the opposite distribution.
  XorSpec swapped() const;
  void validate() const;
};

/// The four XOR clusters P_1, P_{-1}, N_1, N_{-1} (index lists into [n]).
struct Clusters {
  std::vector<int> p_plus;
  std::vector<int> p_minus;
  std::vector<int> n_plus;
  std::vector<int> n_minus;

  int min_size() const;
  int max_size() const;
};

/// A training sample S. Columns of `x` are samples; `noise` holds the xi_j
/// block separately so opposite-dataset mappings never decompose x numerically.
struct Dataset {
  Problem problem = Problem::kLinear;
  Eigen::MatrixXd x;      // d x n
  Eigen::MatrixXd noise;  // d x n, the Xi matrix
  Eigen::VectorXd y;      // entries +-1
  std::vector<SignalTag> signal;
  Clusters clusters;      // populated for XOR only
  double sigma = 0.0;

  int d() const { return static_cast<int>(x.rows()); }
  int n() const { return static_cast<int>(x.cols()); }
};

enum class LinearOpposite { kPsi, kPsiBar };

Dataset sample_linear(const LinearSpec& spec, std::uint64_t seed);
Dataset sample_xor(const XorSpec& spec, std::uint64_t seed);

/// psi flips the signal component and keeps xi; psi_bar keeps the signal and
/// negates xi. Labels are unchanged in both.
Dataset opposite_linear(const Dataset& ds, const LinearSpec& spec, LinearOpposite variant);

/// Swaps the roles of mu1 and mu2 cluster by cluster, keeping xi and y.
Dataset opposite_xor(const Dataset& ds, const XorSpec& spec);

/// Direction vector for a tag under the given signal basis.
Eigen::VectorXd signal_vector(SignalTag tag, const Eigen::VectorXd& mu1,
                              const Eigen::VectorXd& mu2);

/// Draws one fresh sample into `x` and returns its label. Used by the
/// Monte-Carlo estimators, which stream samples instead of materializing them.
double draw_linear(const LinearSpec& spec, CounterRng& rng, Eigen::Ref<Eigen::VectorXd> x);
double draw_xor(const XorSpec& spec, CounterRng& rng, Eigen::Ref<Eigen::VectorXd> x,
                SignalTag* tag = nullptr);

/// Random orthonormal pair, useful for exercising non-axis-aligned specs.
std::array<Eigen::VectorXd, 2> random_orthonormal_pair(int d, std::uint64_t seed);

}  // namespace marginlab
