#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace lcbo {

/// Smooth maximum (1/alpha) log sum exp(alpha g_i), evaluated with a
/// max-shift so large margins cannot overflow. Lies within
/// [max g, max g + log(n)/alpha].
inline double lse_aggregate(const Eigen::VectorXd& margins, double alpha) {
  if (margins.size() == 0) throw std::invalid_argument("lse_aggregate: empty input");
  if (!(alpha > 0.0)) throw std::invalid_argument("lse_aggregate: alpha must be positive");
  const double m = margins.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) s += std::exp(alpha * (margins(i) - m));
  return m + std::log(s) / alpha;
}

}  // namespace lcbo
