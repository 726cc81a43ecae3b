#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "marginlab/labharness.hpp"

namespace marginlab {

// Acceptance thresholds. These are calibrations for desk-scale runs, not
// constants taken from the asymptotic statements they approximate.
namespace accept_threshold {
inline constexpr double kOpt5Objective = 1e-6;      // closed form vs brute-force oracle
inline constexpr double kOpt5Constraint = 1e-9;     // active constraint
inline constexpr double kKappaGenAtH1 = 1e-9;       // h = 1 root sits at 4
inline constexpr double kGammaCrossing = 1e-8;      // gamma_0 = gamma_star at the root
inline constexpr double kKappaGen15 = 1.040;        // h = 1.5 root
inline constexpr double kKappaGen15Tol = 0.01;
inline constexpr double kDualityGap = 1e-8;         // certified solver gap
inline constexpr double kLowerBoundFraction = 0.95; // trials meeting the concentration lower bound
inline constexpr double kLinearGenTestErr = 0.05;   // max-margin error, linear generalization regime
inline constexpr double kLinearQRatio = 0.94;       // q / sqrt(kappa) in that regime
inline constexpr double kHalf = 0.5;
inline constexpr double kLinearHalfTol = 0.02;      // symmetric classifiers, 1e4 MC points
inline constexpr double kUcTestErr = 0.1;           // linear opposite-sample demo
inline constexpr double kUcWitness = 0.9;
inline constexpr double kVacuityRatioTol = 0.05;    // w_b margin ratio around 1/2
inline constexpr double kXorEpsilon = 0.05;         // trained vs constructed margin
inline constexpr double kXorTestErr = 0.1;
inline constexpr double kSignalPresence = 0.02;     // times the margin
inline constexpr double kNoGenMarginFraction = 0.9;
inline constexpr double kXorHalfTol = 0.03;
inline constexpr double kPsiSampleErr = 0.1;        // error on psi(S)
inline constexpr double kPsiDistErr = 0.9;          // error on psi(D)
inline constexpr int kPsiSeedsRequired = 4;         // of 5
inline constexpr double kGradientRel = 1e-5;
}  // namespace accept_threshold

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  int workers = 0;
  /// Criteria to run (1..12); empty runs all of them.
  std::vector<int> only;
};

struct AcceptanceReport {
  std::vector<CriterionResult> results;
  /// Record tables by name (e.g. "xor_gen.csv"), as CSV text.
  std::map<std::string, std::string> csvs;
  std::uint64_t hash = 0;

  bool all_passed() const;
};

AcceptanceReport run_acceptance(const AcceptanceOptions& opts);

/// One line: "PASS  3  <title>  (<detail>)".
std::string format_result(const CriterionResult& r);

}  // namespace marginlab
