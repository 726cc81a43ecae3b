#include "marginlab/xor_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "marginlab/errors.hpp"
#include "marginlab/linalg.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {
namespace {

constexpr int kBatch = 256;

Eigen::VectorXd block_second_layer(int m) {
  Eigen::VectorXd a(m);
  a.head(m / 2).setOnes();
  a.tail(m - m / 2).setConstant(-1.0);
  return a;
}

// Applies phi elementwise and averages a_i phi(z_ij) over neurons.
Eigen::VectorXd outputs_from_preacts(const Eigen::MatrixXd& z, const Eigen::VectorXd& a,
                                     double h) {
  const Eigen::Index m = z.rows();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) acc += a[i] * activation(z(i, j), h);
    out[j] = acc / static_cast<double>(m);
  }
  return out;
}

void check_net_data(const TwoLayerNet& net, const Dataset& ds) {
  if (net.d() != ds.d()) throw ValidationError("network input dimension does not match dataset");
}

// Soft-min value and weights p = softmax(-margins / tau).
double soft_min(const Eigen::VectorXd& margins, double tau, Eigen::VectorXd* weights) {
  const double lo = margins.minCoeff();
  Eigen::VectorXd e = (-(margins.array() - lo) / tau).exp().matrix();
  const double sum = e.sum();
  if (weights) *weights = e / sum;
  return lo - tau * std::log(sum);
}

// Training state expressed through coefficients: W = B X', Z = W X = B K.
struct CoefState {
  Eigen::MatrixXd b;  // m x n
  Eigen::MatrixXd z;  // m x n
  double norm = 0.0;
};

class CoefObjective {
 public:
  CoefObjective(const Dataset& ds, double h, const Eigen::VectorXd& a)
      : k_(ds.x.transpose() * ds.x), y_(ds.y), a_(a), h_(h) {}

  const Eigen::MatrixXd& gram() const { return k_; }

  void refresh(CoefState& st) const {
    st.z.noalias() = st.b * k_;
    st.norm = std::sqrt(std::max(0.0, (st.z.array() * st.b.array()).sum() / st.b.rows()));
  }

  void normalize(CoefState& st) const {
    refresh(st);
    if (!(st.norm > 0.0) || !std::isfinite(st.norm)) return;
    st.b /= st.norm;
    st.z /= st.norm;
    st.norm = 1.0;
  }

  Eigen::VectorXd margins(const CoefState& st) const {
    return outputs_from_preacts(st.z, a_, h_).cwiseProduct(y_);
  }

  // Ascent direction C (m x n) in coefficient space, matching G = C X'.
  double value_and_direction(const CoefState& st, double tau, Eigen::MatrixXd* dir) const {
    const Eigen::VectorXd mar = margins(st);
    Eigen::VectorXd p;
    const double val = soft_min(mar, tau, &p);
    if (dir) {
      const Eigen::Index m = st.z.rows();
      dir->resize(m, st.z.cols());
      for (Eigen::Index j = 0; j < st.z.cols(); ++j) {
        const double wj = p[j] * y_[j] / static_cast<double>(m);
        for (Eigen::Index i = 0; i < m; ++i) {
          (*dir)(i, j) = wj * a_[i] * activation_grad(st.z(i, j), h_);
        }
      }
    }
    return val;
  }

  // sqrt(E_i ||(C X')_i||^2).
  double direction_norm(const Eigen::MatrixXd& dir) const {
    const double sq = ((dir * k_).array() * dir.array()).sum() / dir.rows();
    return std::sqrt(std::max(0.0, sq));
  }

 private:
  Eigen::MatrixXd k_;
  Eigen::VectorXd y_;
  Eigen::VectorXd a_;
  double h_;
};

}  // namespace

TwoLayerNet TwoLayerNet::from_weights(Eigen::MatrixXd w, double h) {
  const int m = static_cast<int>(w.rows());
  if (m <= 0 || m % 4 != 0) throw ValidationError("network width must be a positive multiple of 4");
  if (!(h >= 1.0 && h < 2.0)) throw ValidationError("activation exponent must lie in [1, 2)");
  TwoLayerNet net;
  net.w = std::move(w);
  net.a = block_second_layer(m);
  net.h = h;
  return net;
}

double TwoLayerNet::norm() const {
  return m() > 0 ? w.norm() / std::sqrt(static_cast<double>(m())) : 0.0;
}

TwoLayerNet TwoLayerNet::normalized() const {
  const double nrm = norm();
  if (!(nrm > 0.0)) throw ValidationError("cannot normalize a zero network");
  TwoLayerNet out = *this;
  out.w /= nrm;
  return out;
}

double TwoLayerNet::forward(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = w * x;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) acc += a[i] * activation(z[i], h);
  return acc / static_cast<double>(m());
}

Eigen::VectorXd TwoLayerNet::forward_batch(const Eigen::MatrixXd& x) const {
  return outputs_from_preacts(w * x, a, h);
}

MarginReport normalized_margin(const TwoLayerNet& net, const Dataset& ds, double reference) {
  check_net_data(net, ds);
  MarginReport r;
  r.per_sample = net.forward_batch(ds.x).cwiseProduct(ds.y);
  r.min_margin = r.per_sample.size() ? r.per_sample.minCoeff() : 0.0;
  const double nrm = net.norm();
  r.zero_norm = nrm == 0.0;
  r.normalized_margin = r.zero_norm ? 0.0 : r.min_margin / std::pow(nrm, net.h);
  if (!std::isnan(reference)) attach_reference(r, reference);
  return r;
}

double empirical_error(const TwoLayerNet& net, const Dataset& ds) {
  check_net_data(net, ds);
  const Eigen::VectorXd m = net.forward_batch(ds.x).cwiseProduct(ds.y);
  return mean_zero_one_loss(m);
}

TwoLayerNet construct_signal_net(const XorSpec& spec) {
  spec.validate();
  Eigen::MatrixXd w(spec.m, spec.d);
  const int half = spec.m / 2;
  for (int i = 0; i < spec.m; ++i) {
    const Eigen::VectorXd& dir = i < half ? spec.mu1 : spec.mu2;
    w.row(i) = (i % 2 == 0 ? 1.0 : -1.0) * dir.transpose();
  }
  return TwoLayerNet::from_weights(std::move(w), spec.h);
}

double soft_min_margin(const TwoLayerNet& net, const Dataset& ds, double tau,
                       Eigen::MatrixXd* grad) {
  check_net_data(net, ds);
  if (!(tau > 0.0)) throw ValidationError("soft-min temperature must be > 0");
  const Eigen::MatrixXd z = net.w * ds.x;
  const Eigen::VectorXd mar = outputs_from_preacts(z, net.a, net.h).cwiseProduct(ds.y);
  Eigen::VectorXd p;
  const double val = soft_min(mar, tau, &p);
  if (grad) {
    const Eigen::Index m = z.rows();
    Eigen::MatrixXd c(m, z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double wj = p[j] * ds.y[j] / static_cast<double>(m);
      for (Eigen::Index i = 0; i < m; ++i) c(i, j) = wj * net.a[i] * activation_grad(z(i, j), net.h);
    }
    *grad = c * ds.x.transpose();
  }
  return val;
}

TrainResult train_max_margin(const Dataset& ds, const XorSpec& spec, const TrainerOptions& opts) {
  spec.validate();
  if (ds.problem != Problem::kXor || ds.d() != spec.d) {
    throw ValidationError("train_max_margin expects an XOR dataset matching the spec");
  }
  if (opts.restarts < 1 || opts.iterations < 1) {
    throw ValidationError("trainer needs at least one restart and one iteration");
  }
  const int m = spec.m;
  const int n = ds.n();
  const Eigen::VectorXd a = block_second_layer(m);
  const CoefObjective obj(ds, spec.h, a);

  Eigen::LLT<Eigen::MatrixXd> llt(obj.gram());
  if (llt.info() != Eigen::Success) {
    throw SingularGramError("sample Gram matrix is not positive definite", 0.0);
  }

  TrainResult out;
  double best_overall = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_b_overall;
  const CounterRng root = CounterRng(opts.seed).substream(stream_tag::kTrainer);

  for (int r = 0; r < opts.restarts; ++r) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(r));
    // Gaussian rows projected onto span(X): coefficient rows b' = U^{-1} g'
    // with g ~ N(0, I_n), since then W = B X' has rows ~ N(0, X K^{-1} X').
    Eigen::MatrixXd g(n, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) g(j, i) = rng.normal();
    CoefState st;
    st.b = llt.matrixU().solve(g).transpose();  // K = U'U
    obj.normalize(st);

    Eigen::VectorXd mar = obj.margins(st);
    double tau = std::max(mar.maxCoeff() - mar.minCoeff(), 1e-2);
    double step = opts.step;
    double best = mar.minCoeff();
    Eigen::MatrixXd best_b = st.b;
    Eigen::MatrixXd dir;
    double val = obj.value_and_direction(st, tau, &dir);
    double window_start = val;
    int since_window = 0;
    bool aborted = false;

    for (int it = 0; it < opts.iterations; ++it) {
      const double dnorm = obj.direction_norm(dir);
      bool accepted = false;
      if (dnorm > 0.0 && std::isfinite(dnorm)) {
        double eta = step;
        for (int k = 0; k <= opts.max_halvings; ++k) {
          CoefState trial;
          trial.b = st.b + (eta / dnorm) * dir;
          obj.normalize(trial);
          Eigen::MatrixXd tdir;
          const double tval = obj.value_and_direction(trial, tau, &tdir);
          if (!std::isfinite(tval)) {
            aborted = true;
            break;
          }
          if (tval > val) {
            st = std::move(trial);
            val = tval;
            dir = std::move(tdir);
            step = std::min(eta * opts.step_growth, 1.0);
            accepted = true;
            break;
          }
          eta *= 0.5;
        }
      }
      if (aborted) break;

      mar = obj.margins(st);
      const double hard = mar.minCoeff();
      if (hard > best) {
        best = hard;
        best_b = st.b;
      }

      ++since_window;
      const bool stalled = !accepted;
      if (stalled || since_window >= opts.plateau_window) {
        const double gain = val - window_start;
        if (stalled || gain < opts.plateau_tol * std::abs(window_start)) {
          if (tau <= opts.tau_floor && stalled) break;
          tau = std::max(tau * opts.tau_decay, opts.tau_floor);
          if (stalled) step = opts.step;
          val = obj.value_and_direction(st, tau, &dir);
        }
        window_start = val;
        since_window = 0;
      }

      if (it % opts.trace_every == 0 || it + 1 == opts.iterations) {
        out.trace.push_back({r, it, tau, val, hard, best, step});
      }
    }
    if (aborted) {
      out.note += "restart " + std::to_string(r) + " aborted on a non-finite objective; ";
    }
    out.restart_margins.push_back(best);
    if (best > best_overall) {
      best_overall = best;
      best_b_overall = best_b;
      out.best_restart = r;
    }
  }
  if (!std::isfinite(best_overall)) {
    throw SolverError("trainer produced no finite margin in any restart", best_overall);
  }

  Eigen::MatrixXd w = best_b_overall * ds.x.transpose();
  out.net = TwoLayerNet::from_weights(std::move(w), spec.h).normalized();
  out.report = normalized_margin(out.net, ds, opts.reference_margin);
  if (!std::isnan(opts.reference_margin) &&
      !certify_eps_optimal(out.report.normalized_margin, opts.reference_margin, opts.epsilon)) {
    out.soft_failure = true;
    std::ostringstream msg;
    msg << "trained margin " << out.report.normalized_margin << " is below (1 - " << opts.epsilon
        << ") x reference " << opts.reference_margin;
    out.note += msg.str();
  }
  return out;
}

NetDecomposition decompose_net(const TwoLayerNet& net, const Dataset& ds, const XorSpec& spec) {
  check_net_data(net, ds);
  if (net.d() != spec.d) throw ValidationError("network dimension does not match spec");
  NetDecomposition dec;
  dec.half = net.half();
  dec.p1 = net.w * spec.mu1;
  dec.p2 = net.w * spec.mu2;
  dec.u = dec.p1 * spec.mu1.transpose() + dec.p2 * spec.mu2.transpose();
  dec.v = net.w - dec.u;
  dec.s = dec.p1.head(dec.half);
  dec.t = dec.p2.tail(net.m() - dec.half);
  dec.c = dec.v * ds.noise;
  const double sm = std::sqrt(static_cast<double>(net.m()));
  dec.u_norm = dec.u.norm() / sm;
  dec.v_norm = dec.v.norm() / sm;
  dec.net_norm = net.norm();
  return dec;
}

double spurious_influence_bound(double u_norm, double v_norm, double sigma, double t, double h) {
  if (t < 1.0) throw ValidationError("spurious influence bound requires t >= 1");
  const double core = (t + 1.0) * sigma * sigma * v_norm * v_norm;
  return (8.0 * u_norm + 3.0) * core + 2.0 * std::pow(core, h / 2.0);
}

double spurious_influence_bound(const NetDecomposition& dec, double sigma, double t, double h) {
  return spurious_influence_bound(dec.u_norm, dec.v_norm, sigma, t, h);
}

std::vector<double> spurious_coverage(const TwoLayerNet& net, const XorSpec& spec,
                                      const std::vector<double>& t_values, int mc_samples,
                                      std::uint64_t seed) {
  if (mc_samples < 1) throw ValidationError("mc_samples must be >= 1");
  spec.validate();
  const Eigen::VectorXd p1 = net.w * spec.mu1;
  const Eigen::VectorXd p2 = net.w * spec.mu2;
  TwoLayerNet signal_part = net;
  signal_part.w = p1 * spec.mu1.transpose() + p2 * spec.mu2.transpose();
  const double sm = std::sqrt(static_cast<double>(net.m()));
  const double u_norm = signal_part.w.norm() / sm;
  const double v_norm = (net.w - signal_part.w).norm() / sm;
  std::vector<double> bounds;
  for (double t : t_values) bounds.push_back(spurious_influence_bound(u_norm, v_norm, spec.sigma, t, net.h));

  std::vector<int> hits(t_values.size(), 0);
  const CounterRng root = CounterRng(seed).substream(stream_tag::kTestDraws);
  Eigen::MatrixXd batch(spec.d, kBatch);
  for (int start = 0; start < mc_samples; start += kBatch) {
    const int cnt = std::min(kBatch, mc_samples - start);
    for (int k = 0; k < cnt; ++k) {
      CounterRng rng = root.substream(static_cast<std::uint64_t>(start + k));
      draw_xor(spec, rng, batch.col(k));
    }
    const auto xs = batch.leftCols(cnt);
    const Eigen::VectorXd full = net.forward_batch(xs);
    const Eigen::VectorXd sig = signal_part.forward_batch(xs);
    for (int k = 0; k < cnt; ++k) {
      const double gap = std::abs(full[k] - sig[k]);
      for (std::size_t b = 0; b < bounds.size(); ++b)
        if (gap <= bounds[b]) ++hits[b];
    }
  }
  std::vector<double> cov;
  for (int h : hits) cov.push_back(static_cast<double>(h) / mc_samples);
  return cov;
}

CrossMassRecord cross_mass_diagnostic(const NetDecomposition& dec, const Dataset& ds) {
  if (dec.c.cols() != ds.n()) throw ValidationError("decomposition does not match dataset");
  const int m = static_cast<int>(dec.c.rows());
  const int half = dec.half;
  const double scale = dec.net_norm > 0.0 ? 1.0 / (dec.net_norm * dec.net_norm) : 0.0;
  const double dsig2 = ds.d() * ds.sigma * ds.sigma;

  auto sum_sq = [&](int row, const std::vector<int>& cols) {
    double acc = 0.0;
    for (int j : cols) acc += dec.c(row, j) * dec.c(row, j);
    return acc;
  };
  std::vector<int> pos_cols(ds.clusters.p_plus);
  pos_cols.insert(pos_cols.end(), ds.clusters.p_minus.begin(), ds.clusters.p_minus.end());
  std::vector<int> neg_cols(ds.clusters.n_plus);
  neg_cols.insert(neg_cols.end(), ds.clusters.n_minus.begin(), ds.clusters.n_minus.end());

  double plus_part = 0.0;
  for (int i = 0; i < half; ++i) plus_part += dec.p2[i] * dec.p2[i] + sum_sq(i, neg_cols) / dsig2;
  double minus_part = 0.0;
  for (int i = half; i < m; ++i) minus_part += dec.p1[i] * dec.p1[i] + sum_sq(i, pos_cols) / dsig2;

  CrossMassRecord out;
  out.total = scale * 0.5 * (plus_part / half + minus_part / (m - half));
  out.per_point.resize(ds.n());
  for (int j = 0; j < ds.n(); ++j) {
    // Neurons whose output sign opposes the label.
    const int lo = ds.y[j] > 0 ? half : 0;
    const int hi = ds.y[j] > 0 ? m : half;
    double acc = 0.0;
    for (int i = lo; i < hi; ++i) acc += dec.c(i, j) * dec.c(i, j);
    out.per_point[j] = scale * 0.5 * acc / (hi - lo);
  }
  return out;
}

double SignalPresence::min() const {
  return std::min({plus_mu1, minus_mu1, plus_mu2, minus_mu2});
}

SignalPresence signal_presence(const TwoLayerNet& net, const XorSpec& spec) {
  const TwoLayerNet unit = net.normalized();
  const Eigen::VectorXd p1 = unit.w * spec.mu1;
  const Eigen::VectorXd p2 = unit.w * spec.mu2;
  const int half = unit.half();
  const int m = unit.m();
  SignalPresence out;
  for (int i = 0; i < half; ++i) {
    out.plus_mu1 += activation(p1[i], unit.h);
    out.minus_mu1 += activation(-p1[i], unit.h);
  }
  for (int i = half; i < m; ++i) {
    out.plus_mu2 += activation(p2[i], unit.h);
    out.minus_mu2 += activation(-p2[i], unit.h);
  }
  out.plus_mu1 *= 0.5 / half;
  out.minus_mu1 *= 0.5 / half;
  out.plus_mu2 *= 0.5 / (m - half);
  out.minus_mu2 *= 0.5 / (m - half);
  return out;
}

double xor_test_error(const TwoLayerNet& net, const XorSpec& spec, int mc_samples,
                      std::uint64_t seed) {
  if (mc_samples < 1) throw ValidationError("mc_samples must be >= 1");
  spec.validate();
  if (net.d() != spec.d) throw ValidationError("network dimension does not match spec");
  const CounterRng root = CounterRng(seed).substream(stream_tag::kTestDraws);
  Eigen::MatrixXd batch(spec.d, kBatch);
  Eigen::VectorXd labels(kBatch);
  double errors = 0.0;
  for (int start = 0; start < mc_samples; start += kBatch) {
    const int cnt = std::min(kBatch, mc_samples - start);
    for (int k = 0; k < cnt; ++k) {
      CounterRng rng = root.substream(static_cast<std::uint64_t>(start + k));
      labels[k] = draw_xor(spec, rng, batch.col(k));
    }
    const Eigen::VectorXd f = net.forward_batch(batch.leftCols(cnt));
    for (int k = 0; k < cnt; ++k)
      errors += zero_one_loss(labels[k] * f[k]);
  }
  return errors / mc_samples;
}

}  // namespace marginlab
