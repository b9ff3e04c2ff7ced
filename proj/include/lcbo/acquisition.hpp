#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lcbo/gp.hpp"
#include "lcbo/kernel.hpp"
#include "lcbo/logsumexp.hpp"
#include "lcbo/rng.hpp"

namespace lcbo {

struct AcquisitionConfig {
  int batch_size = 5;           // b2
  double local_radius = 0.1;    // delta, normalized units
  double lse_temperature = 20.0;
  int restarts = 10;
  int max_steps = 30;
  double step_length = 0.01;    // Adam learning rate
  double fd_step = 1e-4;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("acquisition: batch_size >= 1 required");
    if (!(local_radius > 0.0) || local_radius > 1.0)
      throw std::invalid_argument("acquisition: local_radius must be in (0, 1]");
    if (!(lse_temperature > 0.0))
      throw std::invalid_argument("acquisition: lse_temperature must be positive");
    if (restarts < 1 || max_steps < 1)
      throw std::invalid_argument("acquisition: restarts and max_steps must be positive");
  }
};

/// Trace of the posterior gradient covariance at x_k conditioned on the
/// design X_existing united with the hypothetical batch Z. Depends on
/// locations only; observed responses never enter.
inline double grad_var_trace(const KernelSpec& spec, double noise_var, const Matrix& X_existing,
                             const Matrix& Z, const Vector& x_k) {
  const Eigen::Index n = X_existing.rows(), b = Z.rows();
  Matrix U(n + b, x_k.size());
  if (n > 0) U.topRows(n) = X_existing;
  if (b > 0) U.bottomRows(b) = Z;
  const double prior = kernel_cross_hessian(spec, x_k, x_k).trace();
  if (U.rows() == 0) return prior;
  Matrix K = gram(spec, U);
  K.diagonal().array() += noise_var;
  auto [L, jit] = detail::chol_with_jitter(std::move(K));
  (void)jit;
  Matrix W = kernel_grad_mat(spec, x_k, U).transpose();  // (n+b) x d
  L.triangularView<Eigen::Lower>().solveInPlace(W);
  return prior - W.squaredNorm();
}

/// LogSumExp-smoothed worst case of the per-output gradient-variance
/// traces; sandwiched in [max_i, max_i + log(q)/alpha].
inline double acquisition_value(const std::vector<KernelSpec>& specs, double noise_var,
                                const Matrix& X_existing, const Matrix& Z, const Vector& x_k,
                                double lse_temperature) {
  Vector traces(static_cast<Eigen::Index>(specs.size()));
  for (std::size_t i = 0; i < specs.size(); ++i)
    traces(static_cast<Eigen::Index>(i)) = grad_var_trace(specs[i], noise_var, X_existing, Z, x_k);
  return lse_aggregate(traces, lse_temperature);
}

inline double acquisition_value(const GpModel& model, const Matrix& Z, const Vector& x_k,
                                double lse_temperature) {
  return acquisition_value(model.specs, model.data.noise_var, model.data.X, Z, x_k,
                           lse_temperature);
}

namespace detail {

// Incremental acquisition evaluation around a fixed existing design. The
// union-design trace decomposes through the Schur complement
//   S = K_ZZ + s2 I - B^T A^{-1} B,   W = G_Z - G_X A^{-1} B,
// as  T(Z) = T_base - tr(W S^{-1} W^T),
// so single-row probes (the finite-difference pattern) cost one triangular
// solve pair instead of a full (n+b)^3 factorization.
class AcquisitionEvaluator {
 public:
  AcquisitionEvaluator(const std::vector<KernelSpec>& specs, double noise_var, const Matrix& X,
                       const Vector& x_k, double lse_temperature, int batch)
      : specs_(specs), noise_var_(noise_var), x_k_(x_k), alpha_(lse_temperature),
        b_(batch), n_(X.rows()), d_(x_k.size()) {
    const std::size_t q = specs.size();
    out_.resize(q);
    for (std::size_t o = 0; o < q; ++o) {
      auto& s = out_[o];
      if (n_ > 0) {
        Matrix K = gram(specs_[o], X);
        K.diagonal().array() += noise_var_;
        auto [L, jit] = chol_with_jitter(std::move(K));
        (void)jit;
        s.cholA = std::move(L);
        s.GX = kernel_grad_mat(specs_[o], x_k_, X);
        Matrix W0 = s.GX.transpose();
        s.cholA.triangularView<Eigen::Lower>().solveInPlace(W0);
        s.t_base = kernel_cross_hessian(specs_[o], x_k_, x_k_).trace() - W0.squaredNorm();
      } else {
        s.t_base = kernel_cross_hessian(specs_[o], x_k_, x_k_).trace();
      }
      s.B.resize(n_, b_);
      s.C.resize(n_, b_);
      s.GZ.resize(d_, b_);
      s.W.resize(d_, b_);
      s.S.resize(b_, b_);
    }
    X_ = X;
    Z_.resize(b_, d_);
    traces_.resize(static_cast<Eigen::Index>(q));
    Swork_.resize(b_, b_);
    Vwork_.resize(b_, d_);
  }

  void set_batch(const Matrix& Z) {
    Z_ = Z;
    for (std::size_t o = 0; o < out_.size(); ++o) {
      auto& s = out_[o];
      const auto& spec = specs_[o];
      for (Eigen::Index j = 0; j < b_; ++j) {
        const Vector zj = Z_.row(j).transpose();
        if (n_ > 0) s.B.col(j) = kernel_vec(spec, zj, X_);
        s.GZ.col(j) = kernel_grad1(spec, x_k_, zj);
      }
      if (n_ > 0) {
        s.C = s.B;
        s.cholA.triangularView<Eigen::Lower>().solveInPlace(s.C);
        s.cholA.triangularView<Eigen::Lower>().transpose().solveInPlace(s.C);
        s.W.noalias() = s.GZ - s.GX * s.C;
        s.S.noalias() = -s.B.transpose() * s.C;
      } else {
        s.W = s.GZ;
        s.S.setZero();
      }
      for (Eigen::Index i = 0; i < b_; ++i) {
        s.S(i, i) += spec.outputscale + noise_var_;
        for (Eigen::Index j = i + 1; j < b_; ++j) {
          const double kz =
              kernel_eval(spec, Z_.row(i).transpose(), Z_.row(j).transpose());
          s.S(i, j) += kz;
          s.S(j, i) += kz;
        }
      }
    }
  }

  double value() {
    for (std::size_t o = 0; o < out_.size(); ++o)
      traces_(static_cast<Eigen::Index>(o)) = trace_from(out_[o], out_[o].S, out_[o].W);
    return lse_aggregate(traces_, alpha_);
  }

  /// Acquisition value with row j of the batch replaced by z, leaving the
  /// cached state untouched.
  double value_with_row(Eigen::Index j, const Vector& z) {
    for (std::size_t o = 0; o < out_.size(); ++o) {
      auto& s = out_[o];
      const auto& spec = specs_[o];
      Vector ccol;
      double bc = 0.0;
      if (n_ > 0) {
        bcol_ = kernel_vec(spec, z, X_);
        ccol = bcol_;
        s.cholA.triangularView<Eigen::Lower>().solveInPlace(ccol);
        s.cholA.triangularView<Eigen::Lower>().transpose().solveInPlace(ccol);
        bc = bcol_.dot(ccol);
      }
      Swork_ = s.S;
      Vwork_ = s.W.transpose();
      for (Eigen::Index l = 0; l < b_; ++l) {
        if (l == j) continue;
        double v = kernel_eval(spec, z, Z_.row(l).transpose());
        if (n_ > 0) v -= s.B.col(l).dot(ccol);
        Swork_(j, l) = v;
        Swork_(l, j) = v;
      }
      Swork_(j, j) = spec.outputscale + noise_var_ - bc;
      Vector wcol = kernel_grad1(spec, x_k_, z);
      if (n_ > 0) wcol.noalias() -= s.GX * ccol;
      Vwork_.row(j) = wcol.transpose();
      traces_(static_cast<Eigen::Index>(o)) = trace_from_work(out_[o]);
    }
    return lse_aggregate(traces_, alpha_);
  }

 private:
  struct PerOutput {
    Matrix cholA, GX;
    double t_base = 0.0;
    Matrix B, C, GZ, W, S;
  };

  double trace_from(const PerOutput& s, const Matrix& S, const Matrix& W) {
    Swork_ = S;
    Vwork_ = W.transpose();
    return trace_from_work(s);
  }

  // Consumes Swork_ (b x b Schur complement) and Vwork_ (b x d, rows = W^T).
  double trace_from_work(const PerOutput& s) {
    Eigen::LLT<Eigen::Ref<Matrix>> llt(Swork_);
    if (llt.info() != Eigen::Success) {
      // fall back on a jittered copy; S is PD in exact arithmetic
      Matrix Sj = Swork_;
      Sj.diagonal().array() += 1e-10;
      Eigen::LLT<Matrix> llt2(Sj);
      llt2.matrixL().solveInPlace(Vwork_);
      return s.t_base - Vwork_.squaredNorm();
    }
    llt.matrixL().solveInPlace(Vwork_);
    return s.t_base - Vwork_.squaredNorm();
  }

  std::vector<KernelSpec> specs_;
  double noise_var_;
  Vector x_k_;
  double alpha_;
  Eigen::Index b_, n_, d_;
  Matrix X_, Z_;
  std::vector<PerOutput> out_;
  Vector traces_, bcol_;
  Matrix Swork_, Vwork_;
};

inline bool lex_less(const Matrix& a, const Matrix& b) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) < b(i, j)) return true;
      if (a(i, j) > b(i, j)) return false;
    }
  return false;
}

}  // namespace detail

/// Minimizes the batch acquisition over X ∩ [x_k - delta, x_k + delta] in
/// normalized coordinates by multi-start Adam on all b2*d coordinates
/// jointly, with central-difference gradients. Never returns a batch worse
/// than the best initialization.
inline Matrix minimize_acquisition(const GpModel& model, const Vector& x_k,
                                   const AcquisitionConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index d = x_k.size(), b = cfg.batch_size;
  Vector lo = (x_k.array() - cfg.local_radius).cwiseMax(0.0);
  Vector hi = (x_k.array() + cfg.local_radius).cwiseMin(1.0);

  detail::AcquisitionEvaluator eval(model.specs, model.data.noise_var, model.data.X, x_k,
                                    cfg.lse_temperature, static_cast<int>(b));

  Matrix best_Z;
  double best_v = std::numeric_limits<double>::infinity();
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  for (int r = 0; r < cfg.restarts; ++r) {
    Matrix Z(b, d);
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index j = 0; j < d; ++j) Z(i, j) = rng.uniform(lo(j), hi(j));

    eval.set_batch(Z);
    double v = eval.value();
    Matrix r_best_Z = Z;
    double r_best_v = v;

    Matrix m = Matrix::Zero(b, d), s = Matrix::Zero(b, d), grad(b, d);
    for (int step = 1; step <= cfg.max_steps; ++step) {
      for (Eigen::Index i = 0; i < b; ++i) {
        Vector z = Z.row(i).transpose();
        for (Eigen::Index j = 0; j < d; ++j) {
          const double z0 = z(j);
          z(j) = z0 + cfg.fd_step;
          const double vp = eval.value_with_row(i, z);
          z(j) = z0 - cfg.fd_step;
          const double vm = eval.value_with_row(i, z);
          z(j) = z0;
          grad(i, j) = (vp - vm) / (2.0 * cfg.fd_step);
        }
      }
      m = beta1 * m + (1.0 - beta1) * grad;
      s = beta2 * s + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(beta1, step), c2 = 1.0 - std::pow(beta2, step);
      for (Eigen::Index i = 0; i < b; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
          const double upd = (m(i, j) / c1) / (std::sqrt(s(i, j) / c2) + adam_eps);
          Z(i, j) = std::clamp(Z(i, j) - cfg.step_length * upd, lo(j), hi(j));
        }
      eval.set_batch(Z);
      v = eval.value();
      if (v < r_best_v) {
        r_best_v = v;
        r_best_Z = Z;
      }
    }
    if (r_best_v < best_v || (r_best_v == best_v && detail::lex_less(r_best_Z, best_Z))) {
      best_v = r_best_v;
      best_Z = r_best_Z;
    }
  }
  return best_Z;
}

}  // namespace lcbo
