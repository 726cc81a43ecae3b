#include "marginlab/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "marginlab/errors.hpp"

namespace marginlab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("truncated binary file");
  return v;
}

void put_magic(std::ostream& out, const char* magic) { out.write(magic, 4); }

void expect_magic(std::istream& in, const char* magic) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) {
    throw ValidationError(std::string("bad magic, expected ") + std::string(magic, 4));
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw ValidationError("unsupported format version");
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(out, v[i]);
}

Eigen::VectorXd get_vector(std::istream& in, std::size_t n) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = get<double>(in);
  return v;
}

void put_indices(std::ostream& out, const std::vector<int>& idx) {
  put<std::uint64_t>(out, idx.size());
  for (int j : idx) put<std::uint64_t>(out, static_cast<std::uint64_t>(j));
}

std::vector<int> get_indices(std::istream& in, std::uint64_t n_max) {
  const auto count = get<std::uint64_t>(in);
  if (count > n_max) throw ValidationError("cluster larger than the dataset");
  std::vector<int> idx(count);
  for (auto& j : idx) {
    const auto v = get<std::uint64_t>(in);
    if (v >= n_max) throw ValidationError("cluster index out of range");
    j = static_cast<int>(v);
  }
  return idx;
}

void check_stream(const std::ios& s, const std::string& path) {
  if (!s) throw std::runtime_error("I/O error on " + path);
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds, const Eigen::VectorXd& mu1,
                   const Eigen::VectorXd& mu2) {
  const std::uint64_t d = ds.d(), n = ds.n();
  if (static_cast<std::uint64_t>(mu1.size()) != d || static_cast<std::uint64_t>(mu2.size()) != d) {
    throw ValidationError("signal directions do not match dataset dimension");
  }
  put_magic(out, "MLDS");
  put<std::uint32_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(ds.problem));
  put<std::uint64_t>(out, d);
  put<std::uint64_t>(out, n);
  put<double>(out, ds.sigma);
  put_vector(out, mu1);
  put_vector(out, mu2);
  for (std::uint64_t i = 0; i < d; ++i)
    for (std::uint64_t j = 0; j < n; ++j) put<double>(out, ds.x(i, j));
  put_vector(out, ds.y);
  for (SignalTag t : ds.signal) put<std::uint8_t>(out, static_cast<std::uint8_t>(t));
  put_indices(out, ds.clusters.p_plus);
  put_indices(out, ds.clusters.p_minus);
  put_indices(out, ds.clusters.n_plus);
  put_indices(out, ds.clusters.n_minus);
}

Dataset read_dataset(std::istream& in, Eigen::VectorXd* mu1_out, Eigen::VectorXd* mu2_out) {
  expect_magic(in, "MLDS");
  Dataset ds;
  const auto problem = get<std::uint8_t>(in);
  if (problem > 1) throw ValidationError("unknown problem tag");
  ds.problem = static_cast<Problem>(problem);
  const auto d = get<std::uint64_t>(in);
  const auto n = get<std::uint64_t>(in);
  if (d == 0 || n == 0 || d > (1u << 26) || n > (1u << 26)) {
    throw ValidationError("implausible dataset dimensions");
  }
  ds.sigma = get<double>(in);
  const Eigen::VectorXd mu1 = get_vector(in, d);
  const Eigen::VectorXd mu2 = get_vector(in, d);
  ds.x.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < d; ++i)
    for (std::uint64_t j = 0; j < n; ++j) ds.x(i, j) = get<double>(in);
  ds.y = get_vector(in, n);
  ds.signal.resize(n);
  for (auto& t : ds.signal) {
    const auto v = get<std::uint8_t>(in);
    if (v > 3) throw ValidationError("unknown signal tag");
    t = static_cast<SignalTag>(v);
  }
  ds.clusters.p_plus = get_indices(in, n);
  ds.clusters.p_minus = get_indices(in, n);
  ds.clusters.n_plus = get_indices(in, n);
  ds.clusters.n_minus = get_indices(in, n);
  // The noise block is recovered from the stored signal tags.
  ds.noise = ds.x;
  for (std::uint64_t j = 0; j < n; ++j) {
    ds.noise.col(static_cast<Eigen::Index>(j)) -= signal_vector(ds.signal[j], mu1, mu2);
  }
  if (mu1_out) *mu1_out = mu1;
  if (mu2_out) *mu2_out = mu2;
  return ds;
}

void write_net(std::ostream& out, const TwoLayerNet& net) {
  put_magic(out, "MLNN");
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(net.m()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(net.d()));
  put<double>(out, net.h);
  put_vector(out, net.a);
  for (int i = 0; i < net.m(); ++i)
    for (int j = 0; j < net.d(); ++j) put<double>(out, net.w(i, j));
}

TwoLayerNet read_net(std::istream& in) {
  expect_magic(in, "MLNN");
  const auto m = get<std::uint64_t>(in);
  const auto d = get<std::uint64_t>(in);
  if (m == 0 || d == 0 || m > (1u << 20) || d > (1u << 26)) {
    throw ValidationError("implausible network dimensions");
  }
  const double h = get<double>(in);
  const Eigen::VectorXd a = get_vector(in, m);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < m; ++i)
    for (std::uint64_t j = 0; j < d; ++j) w(i, j) = get<double>(in);
  TwoLayerNet net = TwoLayerNet::from_weights(std::move(w), h);
  if ((net.a - a).cwiseAbs().maxCoeff() != 0.0) {
    throw ValidationError("stored second layer is not the block pattern");
  }
  return net;
}

void save_dataset(const std::string& path, const Dataset& ds, const Eigen::VectorXd& mu1,
                  const Eigen::VectorXd& mu2) {
  std::ofstream out(path, std::ios::binary);
  check_stream(out, path);
  write_dataset(out, ds, mu1, mu2);
  check_stream(out, path);
}

Dataset load_dataset(const std::string& path, Eigen::VectorXd* mu1, Eigen::VectorXd* mu2) {
  std::ifstream in(path, std::ios::binary);
  check_stream(in, path);
  return read_dataset(in, mu1, mu2);
}

void save_net(const std::string& path, const TwoLayerNet& net) {
  std::ofstream out(path, std::ios::binary);
  check_stream(out, path);
  write_net(out, net);
  check_stream(out, path);
}

TwoLayerNet load_net(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_stream(in, path);
  return read_net(in);
}

}  // namespace marginlab
