#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "marginlab/margin.hpp"
#include "marginlab/synthdata.hpp"

namespace marginlab {

/// f_W(x) = E_i a_i phi(w_i'x) with a = (+1 x m/2, -1 x m/2) and phi = relu^h.
struct TwoLayerNet {
  Eigen::MatrixXd w;  // m x d
  Eigen::VectorXd a;
  double h = 1.5;

  /// Attaches the block second layer; throws ValidationError unless m % 4 == 0.
  static TwoLayerNet from_weights(Eigen::MatrixXd w, double h);

  int m() const { return static_cast<int>(w.rows()); }
  int d() const { return static_cast<int>(w.cols()); }
  int half() const { return m() / 2; }
  /// sqrt(E_i ||w_i||^2).
  double norm() const;
  TwoLayerNet normalized() const;

  double forward(const Eigen::VectorXd& x) const;
  /// Outputs for every column of `x`.
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& x) const;
};

MarginReport normalized_margin(const TwoLayerNet& net, const Dataset& ds,
                               double reference = std::numeric_limits<double>::quiet_NaN());

/// Mean 0/1 loss on the dataset (ties cost 1/2).
double empirical_error(const TwoLayerNet& net, const Dataset& ds);

/// H+ rows alternate +-mu1, H- rows alternate +-mu2.
TwoLayerNet construct_signal_net(const XorSpec& spec);

/// Soft-min margin -tau log sum_j exp(-y_j f(x_j) / tau). When `grad` is given
/// it receives the m x d gradient with respect to W.
double soft_min_margin(const TwoLayerNet& net, const Dataset& ds, double tau,
                       Eigen::MatrixXd* grad = nullptr);

struct TrainerOptions {
  int iterations = 6000;      // per restart
  int restarts = 3;
  double step = 0.05;         // initial angular step
  double step_growth = 1.25;
  int max_halvings = 30;
  double tau_decay = 0.7;
  int plateau_window = 50;
  double plateau_tol = 1e-4;
  double tau_floor = 1e-4;
  int trace_every = 50;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
  /// Lower bound on the max margin (e.g. an explicit construction); NaN if none.
  double reference_margin = std::numeric_limits<double>::quiet_NaN();
};

struct TracePoint {
  int restart = 0;
  int iteration = 0;
  double tau = 0.0;
  double soft_margin = 0.0;
  double margin = 0.0;
  double best_margin = 0.0;
  double step = 0.0;
};

struct TrainResult {
  TwoLayerNet net;
  MarginReport report;
  std::vector<TracePoint> trace;
  std::vector<double> restart_margins;
  int best_restart = 0;
  bool soft_failure = false;
  std::string note;
};

/// Projected ascent on the soft-min margin over the unit sphere with annealed
/// temperature. Rows are kept in the span of the training points, where every
/// KKT point of the max-margin problem lives.
TrainResult train_max_margin(const Dataset& ds, const XorSpec& spec, const TrainerOptions& opts);

struct NetDecomposition {
  Eigen::MatrixXd u;   // W projected onto span(mu1, mu2)
  Eigen::MatrixXd v;   // remainder
  Eigen::VectorXd p1;  // mu1' w_i for every neuron
  Eigen::VectorXd p2;  // mu2' w_i for every neuron
  Eigen::VectorXd s;   // p1 on H+
  Eigen::VectorXd t;   // p2 on H-
  Eigen::MatrixXd c;   // v_i' xi_j, m x n
  double u_norm = 0.0;
  double v_norm = 0.0;
  double net_norm = 0.0;
  int half = 0;
};

NetDecomposition decompose_net(const TwoLayerNet& net, const Dataset& ds, const XorSpec& spec);

/// (8||U|| + 3)(t + 1) sigma^2 ||V||^2 + 2((t + 1) sigma^2 ||V||^2)^{h/2}.
double spurious_influence_bound(double u_norm, double v_norm, double sigma, double t, double h);
double spurious_influence_bound(const NetDecomposition& dec, double sigma, double t, double h);

/// Fraction of fresh draws with |f_W(x) - f_U(x)| within the bound at each t.
std::vector<double> spurious_coverage(const TwoLayerNet& net, const XorSpec& spec,
                                      const std::vector<double>& t_values, int mc_samples,
                                      std::uint64_t seed);

struct CrossMassRecord {
  double total = 0.0;               // D, on the unit-normalized net
  Eigen::VectorXd per_point;        // (1/2) E_{i: a_i = -y_j} (v_i' xi_j)^2
};

CrossMassRecord cross_mass_diagnostic(const NetDecomposition& dec, const Dataset& ds);

/// (1/2) E_{H+} phi(+-mu1'w_i) and (1/2) E_{H-} phi(+-mu2'w_i) on the unit-normalized net.
struct SignalPresence {
  double plus_mu1 = 0.0;
  double minus_mu1 = 0.0;
  double plus_mu2 = 0.0;
  double minus_mu2 = 0.0;

  double min() const;
};

SignalPresence signal_presence(const TwoLayerNet& net, const XorSpec& spec);

/// Monte-Carlo 0/1 error on fresh draws from the distribution described by `spec`.
/// Pass spec.swapped() to measure error on the opposite distribution.
double xor_test_error(const TwoLayerNet& net, const XorSpec& spec, int mc_samples,
                      std::uint64_t seed);

}  // namespace marginlab
