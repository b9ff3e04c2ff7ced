#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lcbo/domain.hpp"
#include "lcbo/kernel.hpp"

namespace lcbo {

/// Sliding-window training set in model coordinates: inputs normalized to
/// the unit cube, outputs standardized. Column 0 of Y is the objective,
/// columns 1..m the constraints.
struct Dataset {
  Matrix X;                // n x d
  Matrix Y;                // n x (m+1)
  double noise_var = 0.01; // standardized-output units
  int window = 0;          // N_m; 0 disables windowing

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
  Eigen::Index outputs() const { return Y.cols(); }

  void validate() const {
    if (X.rows() != Y.rows()) throw std::invalid_argument("dataset: X/Y row mismatch");
    if (!(noise_var > 0.0)) throw std::invalid_argument("dataset: noise_var must be positive");
    if (!X.allFinite() || !Y.allFinite()) throw std::invalid_argument("dataset: non-finite entries");
  }

  /// Appends rows, then keeps only the `window` most recent.
  void append(const Matrix& Xnew, const Matrix& Ynew) {
    if (Xnew.rows() != Ynew.rows()) throw std::invalid_argument("append: row mismatch");
    const Eigen::Index n0 = X.rows();
    Matrix X2(n0 + Xnew.rows(), Xnew.cols());
    Matrix Y2(n0 + Ynew.rows(), Ynew.cols());
    if (n0 > 0) {
      X2.topRows(n0) = X;
      Y2.topRows(n0) = Y;
    }
    X2.bottomRows(Xnew.rows()) = Xnew;
    Y2.bottomRows(Ynew.rows()) = Ynew;
    if (window > 0 && X2.rows() > window) {
      X = X2.bottomRows(window).eval();
      Y = Y2.bottomRows(window).eval();
    } else {
      X = std::move(X2);
      Y = std::move(Y2);
    }
  }
};

/// Affine maps between original and model coordinates: min-max input
/// scaling onto [0,1]^d plus per-output z-scoring.
struct Standardizer {
  Vector x_lo, x_hi;
  Vector y_mean, y_scale;

  static Standardizer identity(const BoxDomain& box, Eigen::Index num_outputs) {
    Standardizer s;
    s.x_lo = box.lower;
    s.x_hi = box.upper;
    s.y_mean = Vector::Zero(num_outputs);
    s.y_scale = Vector::Ones(num_outputs);
    return s;
  }

  /// Same input scaling, output statistics recomputed from raw data.
  static Standardizer fit(const BoxDomain& box, const Matrix& Y_raw) {
    Standardizer s;
    s.x_lo = box.lower;
    s.x_hi = box.upper;
    const Eigen::Index q = Y_raw.cols();
    s.y_mean = Vector::Zero(q);
    s.y_scale = Vector::Ones(q);
    const Eigen::Index n = Y_raw.rows();
    if (n >= 2) {
      for (Eigen::Index j = 0; j < q; ++j) {
        const double mu = Y_raw.col(j).mean();
        const double var = (Y_raw.col(j).array() - mu).square().sum() / double(n - 1);
        s.y_mean(j) = mu;
        s.y_scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
      }
    }
    return s;
  }

  Vector to_unit(const Vector& x) const { return (x - x_lo).cwiseQuotient(x_hi - x_lo); }
  Vector from_unit(const Vector& u) const { return x_lo + u.cwiseProduct(x_hi - x_lo); }

  Matrix standardize_outputs(const Matrix& Y_raw) const {
    Matrix Y = Y_raw;
    for (Eigen::Index j = 0; j < Y.cols(); ++j)
      Y.col(j) = (Y.col(j).array() - y_mean(j)) / y_scale(j);
    return Y;
  }

  double destandardize_mean(Eigen::Index j, double m) const { return m * y_scale(j) + y_mean(j); }
  double destandardize_var(Eigen::Index j, double v) const { return v * y_scale(j) * y_scale(j); }
};

/// Posterior over values and gradients for m+1 independent outputs sharing
/// one design matrix. Immutable after fit; queries are const.
struct GpModel {
  std::vector<KernelSpec> specs;  // one per output
  Dataset data;
  Standardizer standardizer;
  std::vector<Matrix> chol;   // lower factor of K + sigma^2 I, per output
  std::vector<Vector> alpha;  // (K + sigma^2 I)^{-1} y, per output
  double jitter = 0.0;

  Eigen::Index dim() const { return data.dim(); }
  Eigen::Index outputs() const { return static_cast<Eigen::Index>(specs.size()); }
};

namespace detail {

/// Cholesky with jitter escalation 1e-10 .. 1e-4.
inline std::pair<Matrix, double> chol_with_jitter(Matrix K) {
  const Eigen::Index n = K.rows();
  double jitter = 0.0;
  for (;;) {
    Matrix A = K;
    if (jitter > 0.0) A.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) return {Matrix(llt.matrixL()), jitter};
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4)
      throw std::runtime_error("gram matrix not factorizable even with jitter 1e-4");
    (void)n;
  }
}

}  // namespace detail

inline GpModel fit(Dataset data, std::vector<KernelSpec> specs, Standardizer standardizer) {
  data.validate();
  if (static_cast<Eigen::Index>(specs.size()) != data.outputs())
    throw std::invalid_argument("fit: one KernelSpec per output required");
  for (const auto& s : specs) s.validate();

  GpModel model;
  model.specs = std::move(specs);
  model.data = std::move(data);
  model.standardizer = std::move(standardizer);
  const Eigen::Index n = model.data.n();
  model.chol.resize(model.specs.size());
  model.alpha.resize(model.specs.size());
  if (n == 0) return model;  // prior model

  for (std::size_t j = 0; j < model.specs.size(); ++j) {
    Matrix K = gram(model.specs[j], model.data.X);
    K.diagonal().array() += model.data.noise_var;
    auto [L, jit] = detail::chol_with_jitter(std::move(K));
    model.jitter = std::max(model.jitter, jit);
    Vector a = model.data.Y.col(static_cast<Eigen::Index>(j));
    L.triangularView<Eigen::Lower>().solveInPlace(a);
    L.triangularView<Eigen::Lower>().transpose().solveInPlace(a);
    model.chol[j] = std::move(L);
    model.alpha[j] = std::move(a);
  }
  return model;
}

/// Posterior mean and variance at x (normalized coordinates), in
/// standardized output units.
inline std::pair<double, double> posterior_value(const GpModel& model, const Vector& x,
                                                 Eigen::Index output) {
  if (output < 0 || output >= model.outputs())
    throw std::out_of_range("posterior_value: output index out of range");
  const auto& spec = model.specs[static_cast<std::size_t>(output)];
  if (model.data.n() == 0) return {0.0, spec.outputscale};
  const Vector kx = kernel_vec(spec, x, model.data.X);
  const double mean = kx.dot(model.alpha[static_cast<std::size_t>(output)]);
  Vector v = kx;
  model.chol[static_cast<std::size_t>(output)].triangularView<Eigen::Lower>().solveInPlace(v);
  const double var = std::max(0.0, spec.outputscale - v.squaredNorm());
  return {mean, var};
}

/// Posterior gradient distribution at x: mean vector and PSD covariance,
/// both with respect to normalized coordinates, standardized units.
inline std::pair<Vector, Matrix> posterior_grad(const GpModel& model, const Vector& x,
                                                Eigen::Index output) {
  if (output < 0 || output >= model.outputs())
    throw std::out_of_range("posterior_grad: output index out of range");
  const auto& spec = model.specs[static_cast<std::size_t>(output)];
  const Matrix H = kernel_cross_hessian(spec, x, x);
  if (model.data.n() == 0) return {Vector::Zero(x.size()), H};
  const Matrix G = kernel_grad_mat(spec, x, model.data.X);  // d x n
  const Vector mean = G * model.alpha[static_cast<std::size_t>(output)];
  Matrix W = G.transpose();  // n x d
  model.chol[static_cast<std::size_t>(output)].triangularView<Eigen::Lower>().solveInPlace(W);
  Matrix cov = H - W.transpose() * W;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {mean, cov};
}

struct HyperPriors {
  // lengthscale ~ Gamma(shape, rate), outputscale ~ Normal(mean, sd)
  double gamma_shape = 3.0;
  double gamma_rate = 3.0;
  double normal_mean = 2.0;
  double normal_sd = 1.0;
};

namespace detail {

/// Log marginal likelihood plus log prior for a single output; -inf when
/// the Gram matrix cannot be factorized.
inline double penalized_lml(const Dataset& data, Eigen::Index output, const KernelSpec& spec,
                            const HyperPriors& priors) {
  const Eigen::Index n = data.n();
  double lml = 0.0;
  if (n > 0) {
    Matrix K = gram(spec, data.X);
    K.diagonal().array() += data.noise_var;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    Vector a = data.Y.col(output);
    llt.matrixL().solveInPlace(a);
    lml = -0.5 * a.squaredNorm() -
          Matrix(llt.matrixL()).diagonal().array().log().sum() -
          0.5 * double(n) * std::log(2.0 * 3.14159265358979323846);
  }
  const double l = spec.lengthscale, k0 = spec.outputscale;
  const double log_prior = (priors.gamma_shape - 1.0) * std::log(l) - priors.gamma_rate * l -
                           0.5 * std::pow((k0 - priors.normal_mean) / priors.normal_sd, 2.0);
  return lml + log_prior;
}

inline Eigen::Vector2d clamp_log_theta(Eigen::Vector2d t) {
  t(0) = std::clamp(t(0), std::log(1e-3), std::log(1e3));
  t(1) = std::clamp(t(1), std::log(1e-4), std::log(1e3));
  return t;
}

}  // namespace detail

/// MAP estimation of (lengthscale, outputscale) per output by multi-start
/// gradient ascent in log-parameter space. Never returns a model with a
/// lower penalized likelihood than the input; observation noise is fixed.
inline GpModel fit_hyperparameters(const GpModel& model, const HyperPriors& priors = {}) {
  if (model.data.n() < 2)
    throw std::invalid_argument("fit_hyperparameters: need at least two observations");

  std::vector<KernelSpec> out_specs = model.specs;
  for (Eigen::Index j = 0; j < model.outputs(); ++j) {
    const auto& cur = model.specs[static_cast<std::size_t>(j)];
    auto objective = [&](const Eigen::Vector2d& t) {
      KernelSpec s = cur;
      s.lengthscale = std::exp(t(0));
      s.outputscale = std::exp(t(1));
      return detail::penalized_lml(model.data, j, s, priors);
    };

    const double mode_l = (priors.gamma_shape - 1.0) / priors.gamma_rate;
    const Eigen::Vector2d starts[3] = {
        {std::log(cur.lengthscale), std::log(cur.outputscale)},
        {std::log(mode_l), std::log(priors.normal_mean)},
        {std::log(0.2), 0.0},
    };

    Eigen::Vector2d best_t = starts[0];
    double best_f = objective(best_t);
    for (const auto& start : starts) {
      Eigen::Vector2d t = detail::clamp_log_theta(start);
      double f = objective(t);
      double step = 0.1;
      for (int it = 0; it < 100 && step > 1e-8; ++it) {
        Eigen::Vector2d g;
        const double h = 1e-5;
        for (int c = 0; c < 2; ++c) {
          Eigen::Vector2d tp = t, tm = t;
          tp(c) += h;
          tm(c) -= h;
          g(c) = (objective(tp) - objective(tm)) / (2.0 * h);
        }
        const double gn = g.norm();
        if (!(gn > 1e-12) || !std::isfinite(gn)) break;
        const Eigen::Vector2d cand = detail::clamp_log_theta(t + (step / gn) * g);
        const double fc = objective(cand);
        if (fc > f) {
          t = cand;
          f = fc;
          step *= 1.3;
        } else {
          step *= 0.5;
        }
      }
      if (f > best_f) {
        best_f = f;
        best_t = t;
      }
    }
    out_specs[static_cast<std::size_t>(j)].lengthscale = std::exp(best_t(0));
    out_specs[static_cast<std::size_t>(j)].outputscale = std::exp(best_t(1));
  }
  return fit(model.data, std::move(out_specs), model.standardizer);
}

/// Penalized log marginal likelihood summed over outputs; exposed for the
/// ascent and idempotence checks.
inline double penalized_likelihood(const GpModel& model, const HyperPriors& priors = {}) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < model.outputs(); ++j)
    total += detail::penalized_lml(model.data, j, model.specs[static_cast<std::size_t>(j)], priors);
  return total;
}

// Destandardized views used by the optimizer loop: original output units,
// gradients with respect to normalized coordinates.

inline double posterior_mean_original(const GpModel& model, const Vector& u, Eigen::Index j) {
  return model.standardizer.destandardize_mean(j, posterior_value(model, u, j).first);
}

inline Vector posterior_grad_original(const GpModel& model, const Vector& u, Eigen::Index j) {
  return model.standardizer.y_scale(j) * posterior_grad(model, u, j).first;
}

}  // namespace lcbo
