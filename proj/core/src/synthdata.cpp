#include "marginlab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "marginlab/errors.hpp"

namespace marginlab {
namespace {

constexpr double kUnitTol = 1e-12;

// Uniform point on the radius-`radius` sphere inside the orthogonal
// complement of the given orthonormal directions.
void draw_sphere_noise(CounterRng& rng, const Eigen::VectorXd* dirs[], int ndirs,
                       double radius, Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = rng.normal();
  // Two Gram-Schmidt passes so the residual inner product sits at rounding level.
  for (int pass = 0; pass < 2; ++pass) {
    for (int k = 0; k < ndirs; ++k) out -= dirs[k]->dot(out) * (*dirs[k]);
  }
  const double norm = out.norm();
  if (!(norm > 0.0)) throw StructuralError("degenerate Gaussian draw in sphere sampler");
  out *= radius / norm;
}

SignalTag tag_from_bits(std::uint64_t bits) { return static_cast<SignalTag>(bits & 3U); }

void check_unit(const Eigen::VectorXd& v, int d, const char* name) {
  if (v.size() != d) {
    throw ValidationError(std::string(name) + " has dimension " + std::to_string(v.size()) +
                          ", expected " + std::to_string(d));
  }
  if (std::abs(v.norm() - 1.0) > kUnitTol) {
    throw ValidationError(std::string(name) + " is not a unit vector (norm " +
                          std::to_string(v.norm()) + ")");
  }
}

}  // namespace

LinearSpec LinearSpec::canonical(int d, int n, double sigma) {
  LinearSpec spec;
  spec.mu = Eigen::VectorXd::Zero(std::max(d, 1));
  spec.mu[0] = 1.0;
  spec.sigma = sigma;
  spec.d = d;
  spec.n = n;
  return spec;
}

LinearSpec LinearSpec::from_kappa(int d, int n, double kappa) {
  if (!(kappa > 0.0) || d <= 0 || n <= 0) {
    throw ValidationError("from_kappa requires kappa > 0, d > 0, n > 0");
  }
  return canonical(d, n, std::sqrt(static_cast<double>(n) / (d * kappa)));
}

void LinearSpec::validate() const {
  if (d < 2) throw ValidationError("linear spec requires d >= 2");
  if (n < 1) throw ValidationError("linear spec requires n >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be > 0");
  check_unit(mu, d, "mu");
  if (!std::isfinite(kappa())) throw ValidationError("kappa is not finite");
}

XorSpec XorSpec::canonical(int d, int n, double sigma, double h, int m) {
  XorSpec spec;
  spec.mu1 = Eigen::VectorXd::Zero(std::max(d, 2));
  spec.mu2 = Eigen::VectorXd::Zero(std::max(d, 2));
  spec.mu1[0] = 1.0;
  spec.mu2[1] = 1.0;
  spec.sigma = sigma;
  spec.d = d;
  spec.n = n;
  spec.h = h;
  spec.m = m;
  return spec;
}

XorSpec XorSpec::from_kappa(int d, int n, double kappa, double h, int m) {
  if (!(kappa > 0.0) || d <= 0 || n <= 0) {
    throw ValidationError("from_kappa requires kappa > 0, d > 0, n > 0");
  }
  return canonical(d, n, std::sqrt(static_cast<double>(n) / (d * kappa)), h, m);
}

XorSpec XorSpec::swapped() const {
  XorSpec out = *this;
  std::swap(out.mu1, out.mu2);
  return out;
}

void XorSpec::validate() const {
  if (d < 3) throw ValidationError("xor spec requires d >= 3");
  if (n < 1) throw ValidationError("xor spec requires n >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be > 0");
  if (!(h >= 1.0 && h < 2.0)) throw ValidationError("activation exponent h must lie in [1, 2)");
  if (m <= 0 || m % 4 != 0) throw ValidationError("width m must be a positive multiple of 4");
  check_unit(mu1, d, "mu1");
  check_unit(mu2, d, "mu2");
  if (std::abs(mu1.dot(mu2)) > kUnitTol) throw ValidationError("mu1 and mu2 must be orthogonal");
}

int Clusters::min_size() const {
  return static_cast<int>(std::min({p_plus.size(), p_minus.size(), n_plus.size(), n_minus.size()}));
}

int Clusters::max_size() const {
  return static_cast<int>(std::max({p_plus.size(), p_minus.size(), n_plus.size(), n_minus.size()}));
}

Eigen::VectorXd signal_vector(SignalTag tag, const Eigen::VectorXd& mu1,
                              const Eigen::VectorXd& mu2) {
  switch (tag) {
    case SignalTag::kPlusMu1: return mu1;
    case SignalTag::kMinusMu1: return -mu1;
    case SignalTag::kPlusMu2: return mu2;
    case SignalTag::kMinusMu2: return -mu2;
  }
  throw StructuralError("unknown signal tag");
}

double draw_linear(const LinearSpec& spec, CounterRng& rng, Eigen::Ref<Eigen::VectorXd> x) {
  const double y = (rng() & 1U) ? 1.0 : -1.0;
  const Eigen::VectorXd* dirs[] = {&spec.mu};
  draw_sphere_noise(rng, dirs, 1, std::sqrt(spec.d - 1.0) * spec.sigma, x);
  x += y * spec.mu;
  return y;
}

double draw_xor(const XorSpec& spec, CounterRng& rng, Eigen::Ref<Eigen::VectorXd> x,
                SignalTag* tag_out) {
  const SignalTag tag = tag_from_bits(rng());
  const Eigen::VectorXd* dirs[] = {&spec.mu1, &spec.mu2};
  draw_sphere_noise(rng, dirs, 2, std::sqrt(spec.d - 2.0) * spec.sigma, x);
  x += signal_vector(tag, spec.mu1, spec.mu2);
  if (tag_out) *tag_out = tag;
  return (tag == SignalTag::kPlusMu1 || tag == SignalTag::kMinusMu1) ? 1.0 : -1.0;
}

Dataset sample_linear(const LinearSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset ds;
  ds.problem = Problem::kLinear;
  ds.sigma = spec.sigma;
  ds.x.resize(spec.d, spec.n);
  ds.noise.resize(spec.d, spec.n);
  ds.y.resize(spec.n);
  ds.signal.resize(spec.n);

  const CounterRng root = CounterRng(seed).substream(stream_tag::kSamples);
  const Eigen::VectorXd* dirs[] = {&spec.mu};
  const double radius = std::sqrt(spec.d - 1.0) * spec.sigma;
  for (int j = 0; j < spec.n; ++j) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(j));
    const double y = (rng() & 1U) ? 1.0 : -1.0;
    draw_sphere_noise(rng, dirs, 1, radius, ds.noise.col(j));
    ds.y[j] = y;
    ds.signal[j] = y > 0 ? SignalTag::kPlusMu1 : SignalTag::kMinusMu1;
    ds.x.col(j) = ds.noise.col(j) + y * spec.mu;
  }
  return ds;
}

Dataset sample_xor(const XorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset ds;
  ds.problem = Problem::kXor;
  ds.sigma = spec.sigma;
  ds.x.resize(spec.d, spec.n);
  ds.noise.resize(spec.d, spec.n);
  ds.y.resize(spec.n);
  ds.signal.resize(spec.n);

  const CounterRng root = CounterRng(seed).substream(stream_tag::kSamples);
  const Eigen::VectorXd* dirs[] = {&spec.mu1, &spec.mu2};
  const double radius = std::sqrt(spec.d - 2.0) * spec.sigma;
  for (int j = 0; j < spec.n; ++j) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(j));
    const SignalTag tag = tag_from_bits(rng());
    draw_sphere_noise(rng, dirs, 2, radius, ds.noise.col(j));
    const Eigen::VectorXd z = signal_vector(tag, spec.mu1, spec.mu2);
    ds.x.col(j) = z + ds.noise.col(j);
    const double a = spec.mu1.dot(ds.x.col(j));
    const double b = spec.mu2.dot(ds.x.col(j));
    const double label = a * a - b * b;
    // |label| is 1 up to rounding: z is a unit signal vector and xi is orthogonal.
    if (!(std::abs(std::abs(label) - 1.0) < 1e-6)) {
      throw StructuralError("xor label magnitude deviates from 1");
    }
    ds.y[j] = label > 0 ? 1.0 : -1.0;
    ds.signal[j] = tag;
    switch (tag) {
      case SignalTag::kPlusMu1: ds.clusters.p_plus.push_back(j); break;
      case SignalTag::kMinusMu1: ds.clusters.p_minus.push_back(j); break;
      case SignalTag::kPlusMu2: ds.clusters.n_plus.push_back(j); break;
      case SignalTag::kMinusMu2: ds.clusters.n_minus.push_back(j); break;
    }
  }
  return ds;
}

Dataset opposite_linear(const Dataset& ds, const LinearSpec& spec, LinearOpposite variant) {
  if (ds.problem != Problem::kLinear || ds.d() != spec.d) {
    throw ValidationError("opposite_linear: dataset was not generated under this linear spec");
  }
  Dataset out = ds;
  for (int j = 0; j < ds.n(); ++j) {
    const SignalTag tag = ds.signal[j];
    if (tag != SignalTag::kPlusMu1 && tag != SignalTag::kMinusMu1) {
      throw ValidationError("opposite_linear: signal component is not +-mu");
    }
    const double sign = tag == SignalTag::kPlusMu1 ? 1.0 : -1.0;
    if (variant == LinearOpposite::kPsi) {
      out.signal[j] = tag == SignalTag::kPlusMu1 ? SignalTag::kMinusMu1 : SignalTag::kPlusMu1;
      out.x.col(j) = ds.noise.col(j) - sign * spec.mu;
    } else {
      out.noise.col(j) = -ds.noise.col(j);
      out.x.col(j) = out.noise.col(j) + sign * spec.mu;
    }
  }
  return out;
}

Dataset opposite_xor(const Dataset& ds, const XorSpec& spec) {
  if (ds.problem != Problem::kXor || ds.d() != spec.d) {
    throw ValidationError("opposite_xor: dataset was not generated under this xor spec");
  }
  Dataset out = ds;
  for (int j = 0; j < ds.n(); ++j) {
    SignalTag mapped{};
    switch (ds.signal[j]) {
      case SignalTag::kPlusMu1: mapped = SignalTag::kPlusMu2; break;
      case SignalTag::kMinusMu1: mapped = SignalTag::kMinusMu2; break;
      case SignalTag::kPlusMu2: mapped = SignalTag::kPlusMu1; break;
      case SignalTag::kMinusMu2: mapped = SignalTag::kMinusMu1; break;
    }
    out.signal[j] = mapped;
    out.x.col(j) = ds.noise.col(j) + signal_vector(mapped, spec.mu1, spec.mu2);
  }
  // Cluster membership is keyed by signal tag, so index lists follow the swap;
  // labels stay where they were.
  out.clusters.p_plus = ds.clusters.n_plus;
  out.clusters.p_minus = ds.clusters.n_minus;
  out.clusters.n_plus = ds.clusters.p_plus;
  out.clusters.n_minus = ds.clusters.p_minus;
  return out;
}

std::array<Eigen::VectorXd, 2> random_orthonormal_pair(int d, std::uint64_t seed) {
  if (d < 2) throw ValidationError("random_orthonormal_pair requires d >= 2");
  CounterRng rng = CounterRng(seed).substream(stream_tag::kDirections);
  Eigen::VectorXd a(d), b(d);
  for (int i = 0; i < d; ++i) a[i] = rng.normal();
  a.normalize();
  for (int i = 0; i < d; ++i) b[i] = rng.normal();
  for (int pass = 0; pass < 2; ++pass) b -= a.dot(b) * a;
  b.normalize();
  return {a, b};
}

}  // namespace marginlab
