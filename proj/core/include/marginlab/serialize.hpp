#pragma once

#include <iosfwd>
#include <string>

#include "marginlab/synthdata.hpp"
#include "marginlab/xor_net.hpp"

namespace marginlab {

// Little-endian flat binary formats used by the CLI.
//
// Dataset ("MLDS"): u32 version, u8 problem, u64 d, u64 n, f64 sigma,
//   f64[d] mu1, f64[d] mu2 (zeros for linear), f64[d*n] X row-major,
//   f64[n] y, u8[n] signal tags, then four clusters as u64 count + u64 indices.
// Net ("MLNN"): u32 version, u64 m, u64 d, f64 h, f64[m] a, f64[m*d] W row-major.

void write_dataset(std::ostream& out, const Dataset& ds, const Eigen::VectorXd& mu1,
                   const Eigen::VectorXd& mu2);
/// Returns the dataset; fills the signal directions when pointers are given.
Dataset read_dataset(std::istream& in, Eigen::VectorXd* mu1 = nullptr,
                     Eigen::VectorXd* mu2 = nullptr);

void write_net(std::ostream& out, const TwoLayerNet& net);
TwoLayerNet read_net(std::istream& in);

void save_dataset(const std::string& path, const Dataset& ds, const Eigen::VectorXd& mu1,
                  const Eigen::VectorXd& mu2);
Dataset load_dataset(const std::string& path, Eigen::VectorXd* mu1 = nullptr,
                     Eigen::VectorXd* mu2 = nullptr);
void save_net(const std::string& path, const TwoLayerNet& net);
TwoLayerNet load_net(const std::string& path);

}  // namespace marginlab
