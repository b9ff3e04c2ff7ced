#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "lcbo/kernel.hpp"
#include "lcbo/problem.hpp"
#include "lcbo/rng.hpp"

namespace lcbo {

/// Deterministic GP sample path materialized as a random Fourier feature
/// expansion f(x) = sqrt(2 kappa0 / M) sum_j w_j cos(omega_j^T x + b_j).
struct RffFunction {
  Matrix omega;    // M x d
  Vector bias;     // M
  Vector weights;  // M
  double amp = 0.0;

  double operator()(const Vector& x) const {
    return amp * (weights.array() * ((omega * x + bias).array().cos())).sum();
  }
};

/// Spectral sampling: RBF frequencies are Gaussian; Matern-2.5 uses the
/// multivariate-t construction (Gaussian scaled by a chi-square draw with
/// 2*nu = 5 degrees of freedom). Same seed, same function.
inline RffFunction rff_sample(const KernelSpec& spec, int num_features, int d,
                              std::uint64_t seed) {
  if (num_features < 1) throw std::invalid_argument("rff_sample: num_features >= 1 required");
  spec.validate();
  Rng rng(seed);
  RffFunction f;
  f.omega.resize(num_features, d);
  f.bias.resize(num_features);
  f.weights.resize(num_features);
  f.amp = std::sqrt(2.0 * spec.outputscale / double(num_features));
  const double two_pi = 6.283185307179586476925286766559;
  for (int j = 0; j < num_features; ++j) {
    for (int c = 0; c < d; ++c) f.omega(j, c) = rng.normal();
    switch (spec.family) {
      case KernelFamily::RBF:
        f.omega.row(j) /= spec.lengthscale;
        break;
      case KernelFamily::Matern25: {
        double chi2 = 0.0;
        for (int c = 0; c < 5; ++c) {
          const double z = rng.normal();
          chi2 += z * z;
        }
        f.omega.row(j) *= std::sqrt(5.0 / chi2) / spec.lengthscale;
        break;
      }
      default:
        throw std::invalid_argument("rff_sample: unsupported kernel family");
    }
    f.bias(j) = rng.uniform(0.0, two_pi);
    f.weights(j) = rng.normal();
  }
  return f;
}

/// Within-model synthetic benchmark: objective and two constraints drawn
/// independently from the same GP prior, constraints shifted by +0.5 to
/// tighten the feasible region; inequality sense, noise sd 0.1. Instances
/// whose feasible region is empty or trivial under a Monte Carlo probe are
/// regenerated with the next internal attempt index.
inline ProblemDef make_synthetic(int d, std::uint64_t seed, int num_features = 1024) {
  if (d < 1) throw std::invalid_argument("make_synthetic: d >= 1 required");
  KernelSpec spec{KernelFamily::RBF, 0.2 * std::sqrt(double(d)), 1.0};

  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t base =
        derive_seed(splitmix64(seed + 0x51ED2701 * attempt), Stream::Rff);
    auto f = rff_sample(spec, num_features, d, splitmix64(base ^ 1));
    auto c1 = rff_sample(spec, num_features, d, splitmix64(base ^ 2));
    auto c2 = rff_sample(spec, num_features, d, splitmix64(base ^ 3));

    Rng probe_rng(derive_seed(base, Stream::Misc));
    const int probes = 4096;
    int feasible = 0;
    Vector x(d);
    for (int t = 0; t < probes; ++t) {
      for (int c = 0; c < d; ++c) x(c) = probe_rng.uniform01();
      if (c1(x) + 0.5 <= 0.0 && c2(x) + 0.5 <= 0.0) ++feasible;
    }
    if (feasible == 0 || feasible == probes) continue;

    ProblemDef p;
    p.name = "synthetic-d" + std::to_string(d) + "-s" + std::to_string(seed);
    p.dim = d;
    p.num_constraints = 2;
    p.domain = BoxDomain::unit_cube(d);
    p.sense = ConstraintSense::Inequality;
    p.objective = [f](const Vector& x) { return f(x); };
    p.constraints = {[c1](const Vector& x) { return c1(x) + 0.5; },
                     [c2](const Vector& x) { return c2(x) + 0.5; }};
    p.noise_sd = 0.1;
    p.ground_truth_specs = {spec, spec, spec};
    return p;
  }
}

}  // namespace lcbo
