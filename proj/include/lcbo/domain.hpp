#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace lcbo {

/// Compact box search space in original problem units.
struct BoxDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxDomain() = default;
  BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size())
      throw std::invalid_argument("box bounds have mismatched dimensions");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower(i) < upper(i)))
        throw std::invalid_argument("box requires lower < upper in every dimension");
  }

  static BoxDomain unit_cube(Eigen::Index d) {
    return BoxDomain(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d));
  }

  Eigen::Index dim() const { return lower.size(); }
};

inline Eigen::VectorXd project(const BoxDomain& box, const Eigen::VectorXd& x) {
  if (x.size() != box.dim()) throw std::invalid_argument("project: dimension mismatch");
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

inline Eigen::VectorXd scale_to_unit(const BoxDomain& box, const Eigen::VectorXd& x) {
  if (x.size() != box.dim()) throw std::invalid_argument("scale_to_unit: dimension mismatch");
  return (x - box.lower).cwiseQuotient(box.upper - box.lower);
}

inline Eigen::VectorXd unscale_from_unit(const BoxDomain& box, const Eigen::VectorXd& u) {
  if (u.size() != box.dim()) throw std::invalid_argument("unscale_from_unit: dimension mismatch");
  return box.lower + u.cwiseProduct(box.upper - box.lower);
}

/// Squared distance from g to the negative normal cone -N_X(x) of the box
/// at x. Separable over coordinates: interior coordinates contribute g_i^2,
/// a coordinate at its lower bound contributes max(0, -g_i)^2 and at its
/// upper bound max(0, g_i)^2. Bound activity is detected with absolute
/// tolerance 1e-9 in normalized coordinates.
inline double normal_cone_dist_sq(const BoxDomain& box, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& g) {
  if (x.size() != box.dim() || g.size() != box.dim())
    throw std::invalid_argument("normal_cone_dist_sq: dimension mismatch");
  double dist_sq = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double width = box.upper(i) - box.lower(i);
    const double tol = 1e-9 * width;
    if (x(i) < box.lower(i) - tol || x(i) > box.upper(i) + tol)
      throw std::invalid_argument("normal_cone_dist_sq: point outside the box");
    const bool at_lower = x(i) <= box.lower(i) + tol;
    const bool at_upper = x(i) >= box.upper(i) - tol;
    if (at_lower && at_upper) continue;  // degenerate, cone is all of R
    if (at_lower) {
      // -N contains all v_i >= 0 here
      const double v = std::min(g(i), 0.0);
      dist_sq += v * v;
    } else if (at_upper) {
      const double v = std::max(g(i), 0.0);
      dist_sq += v * v;
    } else {
      dist_sq += g(i) * g(i);
    }
  }
  return dist_sq;
}

}  // namespace lcbo
