#pragma once

#include <limits>

#include <Eigen/Dense>

namespace marginlab {

/// Margin accounting shared by the linear and network models.
struct MarginReport {
  Eigen::VectorXd per_sample;  // y_j f(x_j)
  double min_margin = 0.0;
  double normalized_margin = 0.0;
  /// Best available estimate of the max normalized margin; NaN when unknown.
  double max_margin_estimate = std::numeric_limits<double>::quiet_NaN();
  /// normalized_margin / max_margin_estimate, NaN when the estimate is unknown.
  double optimality_ratio = std::numeric_limits<double>::quiet_NaN();
  bool zero_norm = false;
};

/// Fills the estimate and ratio fields.
inline void attach_reference(MarginReport& report, double max_margin_estimate) {
  report.max_margin_estimate = max_margin_estimate;
  report.optimality_ratio = max_margin_estimate > 0.0
                                ? report.normalized_margin / max_margin_estimate
                                : std::numeric_limits<double>::quiet_NaN();
}

/// 0/1 loss of a prediction with signed margin y f(x). An exact tie f(x) = 0
/// costs 1/2, the expected loss of breaking it by a fair coin.
inline double zero_one_loss(double signed_margin) {
  if (signed_margin < 0.0) return 1.0;
  return signed_margin == 0.0 ? 0.5 : 0.0;
}

inline double mean_zero_one_loss(const Eigen::VectorXd& signed_margins) {
  if (signed_margins.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < signed_margins.size(); ++j) acc += zero_one_loss(signed_margins[j]);
  return acc / static_cast<double>(signed_margins.size());
}

/// (1 - eps)-max-margin certification against a reference margin.
inline bool certify_eps_optimal(double margin, double reference, double eps) {
  return margin >= (1.0 - eps) * reference;
}

}  // namespace marginlab
