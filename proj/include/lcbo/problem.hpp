#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcbo/domain.hpp"
#include "lcbo/kernel.hpp"
#include "lcbo/rng.hpp"

namespace lcbo {

enum class ConstraintSense { Equality, Inequality };

/// A benchmark problem: noiseless objective/constraint oracles, optional
/// analytic gradients, observation-noise level, and the search box.
struct ProblemDef {
  std::string name;
  int dim = 0;
  int num_constraints = 0;
  BoxDomain domain;
  ConstraintSense sense = ConstraintSense::Inequality;
  std::function<double(const Vector&)> objective;
  std::vector<std::function<double(const Vector&)>> constraints;
  std::function<Vector(const Vector&)> objective_grad;                 // optional
  std::vector<std::function<Vector(const Vector&)>> constraint_grads;  // optional
  double noise_sd = 0.0;
  std::vector<KernelSpec> ground_truth_specs;  // set for within-model problems

  bool has_analytic_gradients() const {
    return static_cast<bool>(objective_grad) &&
           static_cast<int>(constraint_grads.size()) == num_constraints;
  }

  Vector constraint_values(const Vector& x) const {
    Vector c(num_constraints);
    for (int i = 0; i < num_constraints; ++i) c(i) = constraints[static_cast<std::size_t>(i)](x);
    return c;
  }

  /// Euclidean norm of the (sense-aware) constraint violation.
  double violation(const Vector& x) const {
    const Vector c = constraint_values(x);
    if (sense == ConstraintSense::Equality) return c.norm();
    return c.cwiseMax(0.0).norm();
  }
};

/// One noisy zero-order observation of all outputs at x, in the fixed
/// order (objective, c_1, ..., c_m). Consumes exactly m+1 noise draws.
inline Vector noisy_observe(const ProblemDef& p, const Vector& x, Rng& rng) {
  Vector y(p.num_constraints + 1);
  y(0) = p.objective(x) + p.noise_sd * rng.normal();
  for (int i = 0; i < p.num_constraints; ++i)
    y(i + 1) = p.constraints[static_cast<std::size_t>(i)](x) + p.noise_sd * rng.normal();
  return y;
}

/// min x1 + x2  s.t.  x1^2 + x2^2 - 0.5 = 0  on [-1,1]^2. KKT point
/// x* = (-0.5, -0.5) with multiplier 1; used for residual diagnostics.
inline ProblemDef make_toy_circle(double noise_sd = 0.01) {
  ProblemDef p;
  p.name = "toy_circle";
  p.dim = 2;
  p.num_constraints = 1;
  p.domain = BoxDomain(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  p.sense = ConstraintSense::Equality;
  p.objective = [](const Vector& x) { return x(0) + x(1); };
  p.constraints = {[](const Vector& x) { return x(0) * x(0) + x(1) * x(1) - 0.5; }};
  p.objective_grad = [](const Vector& x) {
    (void)x;
    return Vector::Ones(2).eval();
  };
  p.constraint_grads = {[](const Vector& x) { return (2.0 * x).eval(); }};
  p.noise_sd = noise_sd;
  return p;
}

}  // namespace lcbo
