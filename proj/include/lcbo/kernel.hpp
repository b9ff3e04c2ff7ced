#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace lcbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelFamily { RBF, Matern25 };

/// Stationary kernel with isotropic lengthscale and prior variance
/// (outputscale). All derivative formulas are analytic closed forms.
struct KernelSpec {
  KernelFamily family = KernelFamily::RBF;
  double lengthscale = 1.0;
  double outputscale = 1.0;

  void validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
      throw std::invalid_argument("kernel lengthscale must be positive");
    if (!(outputscale > 0.0) || !std::isfinite(outputscale))
      throw std::invalid_argument("kernel outputscale must be positive");
  }
};

namespace detail {
inline constexpr double kSqrt5 = 2.2360679774997896964091736687747;

inline void check_pair(const Vector& x, const Vector& x2) {
  if (x.size() != x2.size())
    throw std::invalid_argument("kernel arguments have mismatched dimensions");
  if (!x.allFinite() || !x2.allFinite())
    throw std::invalid_argument("kernel arguments must be finite");
}
}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& x2) {
  detail::check_pair(x, x2);
  const double r2 = (x - x2).squaredNorm();
  switch (spec.family) {
    case KernelFamily::RBF: {
      const double l2 = spec.lengthscale * spec.lengthscale;
      return spec.outputscale * std::exp(-0.5 * r2 / l2);
    }
    case KernelFamily::Matern25: {
      const double r = std::sqrt(r2);
      const double ar = detail::kSqrt5 * r / spec.lengthscale;
      return spec.outputscale * (1.0 + ar + ar * ar / 3.0) * std::exp(-ar);
    }
  }
  throw std::logic_error("unknown kernel family");
}

/// Gradient with respect to the first argument. Antisymmetric in the
/// arguments for stationary kernels; zero on the diagonal.
inline Vector kernel_grad1(const KernelSpec& spec, const Vector& x, const Vector& x2) {
  detail::check_pair(x, x2);
  const Vector tau = x - x2;
  switch (spec.family) {
    case KernelFamily::RBF: {
      const double l2 = spec.lengthscale * spec.lengthscale;
      const double k = spec.outputscale * std::exp(-0.5 * tau.squaredNorm() / l2);
      return (-k / l2) * tau;
    }
    case KernelFamily::Matern25: {
      const double a = detail::kSqrt5 / spec.lengthscale;
      const double r = tau.norm();
      // dk/dr / r = -(kappa a^2 / 3)(1 + a r) e^{-a r}; finite at r = 0.
      const double w = (spec.outputscale * a * a / 3.0) * (1.0 + a * r) * std::exp(-a * r);
      return -w * tau;
    }
  }
  throw std::logic_error("unknown kernel family");
}

/// Mixed second derivative d^2 k / (dx dx2^T), the prior covariance
/// building block of the gradient posterior. At x = x2 this is the prior
/// gradient covariance, a PSD multiple of the identity.
inline Matrix kernel_cross_hessian(const KernelSpec& spec, const Vector& x, const Vector& x2) {
  detail::check_pair(x, x2);
  const Vector tau = x - x2;
  const auto d = x.size();
  switch (spec.family) {
    case KernelFamily::RBF: {
      const double l2 = spec.lengthscale * spec.lengthscale;
      const double k = spec.outputscale * std::exp(-0.5 * tau.squaredNorm() / l2);
      Matrix h = (k / l2) * Matrix::Identity(d, d);
      h.noalias() -= (k / (l2 * l2)) * (tau * tau.transpose());
      return h;
    }
    case KernelFamily::Matern25: {
      const double a = detail::kSqrt5 / spec.lengthscale;
      const double r = tau.norm();
      const double e = std::exp(-a * r);
      const double c1 = (spec.outputscale * a * a / 3.0) * (1.0 + a * r) * e;
      const double c2 = (spec.outputscale * a * a * a * a / 3.0) * e;
      Matrix h = c1 * Matrix::Identity(d, d);
      h.noalias() -= c2 * (tau * tau.transpose());
      return h;
    }
  }
  throw std::logic_error("unknown kernel family");
}

/// n x n Gram matrix K(X, X); rows of X are points.
inline Matrix gram(const KernelSpec& spec, const Matrix& X) {
  const auto n = X.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = spec.outputscale;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = kernel_eval(spec, X.row(i).transpose(), X.row(j).transpose());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

/// Cross-covariance vector k(x, X).
inline Vector kernel_vec(const KernelSpec& spec, const Vector& x, const Matrix& X) {
  Vector k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    k(i) = kernel_eval(spec, x, X.row(i).transpose());
  return k;
}

/// d x n matrix whose column j is grad_1 k(x, X_j).
inline Matrix kernel_grad_mat(const KernelSpec& spec, const Vector& x, const Matrix& X) {
  Matrix G(x.size(), X.rows());
  for (Eigen::Index j = 0; j < X.rows(); ++j)
    G.col(j) = kernel_grad1(spec, x, X.row(j).transpose());
  return G;
}

}  // namespace lcbo
