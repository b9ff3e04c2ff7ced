#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lcbo/acquisition.hpp"
#include "lcbo/domain.hpp"
#include "lcbo/gp.hpp"
#include "lcbo/problem.hpp"
#include "lcbo/rng.hpp"

namespace lcbo {

enum class StepMode { Decaying, Constant };
enum class BatchSchedule { Fixed, Large, Growing, Theoretical };
enum class GradSource { Model, Analytic };

struct BatchSizes {
  int b1 = 0;
  int b2 = 0;
};

inline BatchSizes batch_sizes(BatchSchedule s, int k, int d, int fixed_b1, int fixed_b2) {
  switch (s) {
    case BatchSchedule::Fixed:
      return {fixed_b1, fixed_b2};
    case BatchSchedule::Large:
      return {5, d};
    case BatchSchedule::Growing:
      return {static_cast<int>(std::floor(std::log(double(k) + 1.0) + 1.0)),
              static_cast<int>(std::floor(0.5 * double(k) + 5.0))};
    case BatchSchedule::Theoretical:
      return {k, d * k * k};
  }
  throw std::logic_error("unknown batch schedule");
}

struct LCBOConfig {
  double step_scale = 0.25;            // s in eta_k = s k^{-1/2}
  StepMode step_mode = StepMode::Decaying;
  double penalty_scale = 10.0;         // rho_0
  double penalty_exponent = 0.25;      // rho_k = rho_0 k^{1/4}
  BatchSchedule batch_schedule = BatchSchedule::Fixed;
  int fixed_b1 = 2;
  int fixed_b2 = 5;
  int window = 0;                      // N_m; 0 means 2d
  double local_radius = 0.1;           // delta, normalized units
  int refit_period = 5;
  ConstraintSense constraint_sense = ConstraintSense::Inequality;
  long budget = 0;                     // zero-order oracle calls
  double noise_var = 0.01;             // GP likelihood noise, standardized units
  // engages only when the problem records generator hyperparameters
  bool use_ground_truth_hypers = true;
  double lse_temperature = 20.0;
  int acq_restarts = 10;
  int acq_max_steps = 30;
  double acq_step_length = 0.01;
  double acq_fd_step = 1e-4;

  double eta(int k) const {
    return step_mode == StepMode::Decaying ? step_scale / std::sqrt(double(k)) : step_scale;
  }
  double rho(int k) const { return penalty_scale * std::pow(double(k), penalty_exponent); }

  void validate() const {
    if (!(step_scale > 0.0)) throw std::invalid_argument("lcbo: step_scale must be positive");
    if (!(penalty_scale > 0.0)) throw std::invalid_argument("lcbo: penalty_scale must be positive");
    if (penalty_exponent < 0.0)
      throw std::invalid_argument("lcbo: penalty schedule must be non-decreasing");
    if (fixed_b1 < 1 || fixed_b2 < 1) throw std::invalid_argument("lcbo: batch sizes must be >= 1");
    if (refit_period < 1) throw std::invalid_argument("lcbo: refit_period must be >= 1");
    if (!(local_radius > 0.0) || local_radius > 1.0)
      throw std::invalid_argument("lcbo: local_radius must be in (0, 1]");
  }
};

struct IterationRecord {
  int k = 0;
  Vector x;             // iterate at which the batch was evaluated (original units)
  Vector x_next;        // post-exploit iterate
  double eta = 0.0;
  double rho = 0.0;
  Matrix batch;         // evaluated points, original units
  Matrix observations;  // noisy outputs per batch row
  Vector grad_hat;      // surrogate penalty gradient, normalized coordinates
  double rs_hat = std::numeric_limits<double>::quiet_NaN();
  double rf_hat = std::numeric_limits<double>::quiet_NaN();
  double rs_true = std::numeric_limits<double>::quiet_NaN();
  double rf_true = std::numeric_limits<double>::quiet_NaN();
  long oracle_calls_cumulative = 0;
  int dataset_size = 0;  // windowed training rows after this iteration
};

/// Quadratic penalty Q_rho = f + (rho/2) ||c||^2, with the hinge
/// composition max(0, c) under inequality sense.
inline double penalty_value(double f_val, const Vector& c_vals, double rho,
                            ConstraintSense sense) {
  if (!(rho > 0.0)) throw std::invalid_argument("penalty_value: rho must be positive");
  const Vector v = sense == ConstraintSense::Equality ? c_vals : c_vals.cwiseMax(0.0).eval();
  return f_val + 0.5 * rho * v.squaredNorm();
}

inline Vector apply_sense(const Vector& c, ConstraintSense sense) {
  return sense == ConstraintSense::Equality ? c : c.cwiseMax(0.0).eval();
}

/// Surrogate penalty gradient grad mu_f + rho sum_i act(mu_ci) grad mu_ci
/// at u (normalized coordinates), with posterior means destandardized to
/// original output units.
inline Vector penalized_grad(const GpModel& model, const Vector& u, double rho,
                             ConstraintSense sense) {
  Vector g = posterior_grad_original(model, u, 0);
  for (Eigen::Index i = 1; i < model.outputs(); ++i) {
    double ci = posterior_mean_original(model, u, i);
    if (sense == ConstraintSense::Inequality) ci = std::max(0.0, ci);
    if (ci != 0.0) g.noalias() += rho * ci * posterior_grad_original(model, u, i);
  }
  return g;
}

/// Projected step of length eta along the normalized negative gradient;
/// stays put when the gradient is numerically zero.
inline Vector exploit_step(const Vector& x, const Vector& grad_hat, double eta,
                           const BoxDomain& box) {
  if (!(eta > 0.0)) throw std::invalid_argument("exploit_step: eta must be positive");
  const double n = grad_hat.norm();
  if (!(n > 1e-12)) return project(box, x);
  return project(box, x - (eta / n) * grad_hat);
}

struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;
};

/// Residuals from the benchmark's analytic oracles at x (original units).
inline KktResiduals kkt_residuals_analytic(const ProblemDef& p, const Vector& x,
                                           const Vector& lambda) {
  if (!p.has_analytic_gradients())
    throw std::invalid_argument("kkt_residuals: problem has no analytic gradients");
  Vector g = p.objective_grad(x);
  for (int i = 0; i < p.num_constraints; ++i)
    g.noalias() += lambda(i) * p.constraint_grads[static_cast<std::size_t>(i)](x);
  KktResiduals r;
  r.stationarity = normal_cone_dist_sq(p.domain, x, g);
  r.feasibility = apply_sense(p.constraint_values(x), p.sense).squaredNorm();
  return r;
}

/// Residuals from posterior means, destandardized and rescaled so the
/// stationarity residual lives in original x units.
inline KktResiduals kkt_residuals_model(const GpModel& model, const BoxDomain& box,
                                        const Vector& u, const Vector& lambda,
                                        ConstraintSense sense) {
  const Vector width = box.upper - box.lower;
  Vector g = posterior_grad_original(model, u, 0).cwiseQuotient(width);
  Vector c(model.outputs() - 1);
  for (Eigen::Index i = 1; i < model.outputs(); ++i) {
    c(i - 1) = posterior_mean_original(model, u, i);
    g.noalias() += lambda(i - 1) * posterior_grad_original(model, u, i).cwiseQuotient(width);
  }
  KktResiduals r;
  r.stationarity = normal_cone_dist_sq(box, unscale_from_unit(box, u), g);
  r.feasibility = apply_sense(c, sense).squaredNorm();
  return r;
}

inline KktResiduals kkt_residuals(GradSource source, const ProblemDef& p, const GpModel* model,
                                  const Vector& x, const Vector& lambda) {
  if (source == GradSource::Analytic) return kkt_residuals_analytic(p, x, lambda);
  if (model == nullptr) throw std::invalid_argument("kkt_residuals: model source requires a model");
  return kkt_residuals_model(*model, p.domain, model->standardizer.to_unit(x), lambda, p.sense);
}

/// Optional warm-start state supplied by the experiment protocol.
struct RunInputs {
  Matrix X0;  // n0 x d initial points, original units
  Matrix Y0;  // n0 x (m+1) noisy observations at X0
  Vector x1;  // starting candidate; box center when empty
};

/// The main loop: per iteration, repeated evaluations at the iterate plus
/// an acquisition batch, GP refresh on the sliding window, one projected
/// penalty-gradient step, and KKT diagnostics at the new iterate.
inline std::vector<IterationRecord> run(const ProblemDef& p, const LCBOConfig& cfg,
                                        std::uint64_t seed, const RunInputs& init = {}) {
  cfg.validate();
  const int d = p.dim, m = p.num_constraints, q = m + 1;
  const int window = cfg.window > 0 ? cfg.window : 2 * d;
  const BoxDomain& box = p.domain;
  const BoxDomain unit = BoxDomain::unit_cube(d);

  Rng noise_rng = Rng::for_stream(seed, Stream::Noise);
  Rng acq_rng = Rng::for_stream(seed, Stream::Acquisition);

  const bool ground_truth = cfg.use_ground_truth_hypers &&
                            static_cast<int>(p.ground_truth_specs.size()) == q;
  std::vector<KernelSpec> specs;
  if (ground_truth) {
    specs = p.ground_truth_specs;
  } else {
    // start at the prior modes of the hyperparameter priors
    specs.assign(static_cast<std::size_t>(q), KernelSpec{KernelFamily::RBF, 2.0 / 3.0, 2.0});
  }

  // sliding raw window: normalized inputs, original-unit outputs
  Matrix U(0, d), Yraw(0, q);
  auto append_window = [&](const Matrix& Unew, const Matrix& Ynew) {
    Matrix U2(U.rows() + Unew.rows(), d), Y2(Yraw.rows() + Ynew.rows(), q);
    U2 << U, Unew;
    Y2 << Yraw, Ynew;
    if (U2.rows() > window) {
      U = U2.bottomRows(window).eval();
      Yraw = Y2.bottomRows(window).eval();
    } else {
      U = std::move(U2);
      Yraw = std::move(Y2);
    }
  };
  if (init.X0.rows() > 0) {
    if (init.X0.rows() != init.Y0.rows() || init.Y0.cols() != q)
      throw std::invalid_argument("run: malformed initial dataset");
    Matrix U0(init.X0.rows(), d);
    for (Eigen::Index r = 0; r < init.X0.rows(); ++r)
      U0.row(r) = scale_to_unit(box, init.X0.row(r).transpose()).transpose();
    append_window(U0, init.Y0);
  }

  Standardizer std_ = Standardizer::identity(box, q);
  if (!ground_truth && Yraw.rows() >= 2) std_ = Standardizer::fit(box, Yraw);

  auto fit_window = [&](const std::vector<KernelSpec>& s) {
    Dataset ds;
    ds.X = U;
    ds.Y = std_.standardize_outputs(Yraw);
    ds.noise_var = cfg.noise_var;
    ds.window = window;
    return fit(ds, s, std_);
  };

  Vector u = init.x1.size() > 0 ? scale_to_unit(box, init.x1)
                                : Vector::Constant(d, 0.5).eval();
  u = project(unit, u);

  GpModel model = fit_window(specs);
  long used = 0;
  std::vector<IterationRecord> records;

  for (int k = 1;; ++k) {
    const BatchSizes bs = batch_sizes(cfg.batch_schedule, k, d, cfg.fixed_b1, cfg.fixed_b2);
    const long cost = static_cast<long>(bs.b1 + bs.b2) * q;
    if (used + cost > cfg.budget) break;

    AcquisitionConfig acf;
    acf.batch_size = bs.b2;
    acf.local_radius = cfg.local_radius;
    acf.lse_temperature = cfg.lse_temperature;
    acf.restarts = cfg.acq_restarts;
    acf.max_steps = cfg.acq_max_steps;
    acf.step_length = cfg.acq_step_length;
    acf.fd_step = cfg.acq_fd_step;
    const Matrix Z2 = minimize_acquisition(model, u, acf, acq_rng);

    Matrix Zu(bs.b1 + bs.b2, d);
    Zu.topRows(bs.b1) = u.transpose().replicate(bs.b1, 1);
    Zu.bottomRows(bs.b2) = Z2;

    Matrix Zorig(Zu.rows(), d), Yb(Zu.rows(), q);
    for (Eigen::Index r = 0; r < Zu.rows(); ++r) {
      const Vector x = unscale_from_unit(box, Zu.row(r).transpose());
      Zorig.row(r) = x.transpose();
      Yb.row(r) = noisy_observe(p, x, noise_rng).transpose();
    }
    used += cost;
    append_window(Zu, Yb);

    if (!ground_truth && k % cfg.refit_period == 0 && Yraw.rows() >= 2) {
      std_ = Standardizer::fit(box, Yraw);
      try {
        model = fit_hyperparameters(fit_window(specs));
        specs = model.specs;
      } catch (const std::exception&) {
        model = fit_window(specs);  // keep previous hyperparameters
      }
    } else {
      model = fit_window(specs);
    }

    const double rho = cfg.rho(k), eta = cfg.eta(k);
    const Vector ghat = penalized_grad(model, u, rho, cfg.constraint_sense);
    const Vector u_next = exploit_step(u, ghat, eta, unit);

    IterationRecord rec;
    rec.k = k;
    rec.x = unscale_from_unit(box, u);
    rec.x_next = unscale_from_unit(box, u_next);
    rec.eta = eta;
    rec.rho = rho;
    rec.batch = std::move(Zorig);
    rec.observations = std::move(Yb);
    rec.grad_hat = ghat;
    rec.oracle_calls_cumulative = used;
    rec.dataset_size = static_cast<int>(U.rows());

    Vector c_hat(m);
    for (int i = 0; i < m; ++i) c_hat(i) = posterior_mean_original(model, u_next, i + 1);
    const Vector lam_hat = rho * apply_sense(c_hat, cfg.constraint_sense);
    const KktResiduals rm = kkt_residuals_model(model, box, u_next, lam_hat, cfg.constraint_sense);
    rec.rs_hat = rm.stationarity;
    rec.rf_hat = rm.feasibility;

    if (p.has_analytic_gradients()) {
      const Vector c_true = p.constraint_values(rec.x_next);
      const Vector lam = rho * apply_sense(c_true, p.sense);
      const KktResiduals rt = kkt_residuals_analytic(p, rec.x_next, lam);
      rec.rs_true = rt.stationarity;
      rec.rf_true = rt.feasibility;
    }

    records.push_back(std::move(rec));
    u = u_next;
  }
  return records;
}

}  // namespace lcbo
