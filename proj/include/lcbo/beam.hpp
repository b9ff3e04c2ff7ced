#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "lcbo/logsumexp.hpp"
#include "lcbo/problem.hpp"

namespace lcbo {

struct BeamParams {
  double length = 100.0;   // in
  double youngs = 2.9e7;   // psi
  double tip_load = 500.0; // lb
  double stress_max = 4e4;
  double tip_disp_max = 2.5;
  double dim_lo = 0.5;
  double dim_hi = 5.0;
  double lse_alpha = 20.0;
};

struct BeamResponse {
  double volume = 0.0;
  double tip_disp = 0.0;
  Vector segment_stress;  // bending stress at each segment root
  double agg_stress = 0.0;
  double tip_margin = 0.0;  // tip_disp / tip_disp_max - 1
};

/// Stepped cantilever with rectangular cross sections, fixed at x = 0 and
/// tip-loaded at x = L. Euler-Bernoulli deflection is integrated segment by
/// segment in closed form (M is linear and I piecewise constant, so the
/// piecewise integration is exact up to rounding).
inline BeamResponse beam_eval(const Vector& widths, const Vector& heights,
                              const BeamParams& bp = {}) {
  const Eigen::Index n = widths.size();
  if (n < 1 || heights.size() != n)
    throw std::invalid_argument("beam_eval: widths and heights must have equal positive size");
  for (Eigen::Index i = 0; i < n; ++i)
    if (widths(i) < bp.dim_lo || widths(i) > bp.dim_hi || heights(i) < bp.dim_lo ||
        heights(i) > bp.dim_hi)
      throw std::invalid_argument("beam_eval: section dimensions out of bounds");

  const double seg = bp.length / double(n);
  BeamResponse r;
  r.segment_stress.resize(n);
  double slope = 0.0, defl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = double(i) * seg;  // segment root, measured from the wall
    const double inertia = widths(i) * std::pow(heights(i), 3) / 12.0;
    const double root_moment = bp.tip_load * (bp.length - a);
    r.segment_stress(i) = root_moment * (heights(i) / 2.0) / inertia;
    r.volume += widths(i) * heights(i) * seg;

    const double c = bp.tip_load / (bp.youngs * inertia);
    defl += slope * seg + c * ((bp.length - a) * seg * seg / 2.0 - seg * seg * seg / 6.0);
    slope += c * ((bp.length - a) * seg - seg * seg / 2.0);
  }
  r.tip_disp = defl;
  r.tip_margin = r.tip_disp / bp.tip_disp_max - 1.0;
  r.agg_stress = lse_aggregate((r.segment_stress.cwiseAbs() / bp.stress_max).array() - 1.0,
                               bp.lse_alpha);
  return r;
}

/// Volume minimization over (w_1..w_N, h_1..h_N) with the tip-deflection
/// margin and the aggregated stress margin as inequality constraints.
inline ProblemDef make_beam_problem(int segments = 25, double noise_sd = 0.1,
                                    const BeamParams& bp = {}) {
  if (segments < 1) throw std::invalid_argument("make_beam_problem: segments >= 1 required");
  ProblemDef p;
  const int d = 2 * segments;
  p.name = "beam" + std::to_string(d);
  p.dim = d;
  p.num_constraints = 2;
  p.domain = BoxDomain(Vector::Constant(d, bp.dim_lo), Vector::Constant(d, bp.dim_hi));
  p.sense = ConstraintSense::Inequality;
  auto split = [segments](const Vector& x) {
    return std::pair<Vector, Vector>(x.head(segments), x.tail(segments));
  };
  p.objective = [split, bp](const Vector& x) {
    auto [w, h] = split(x);
    return beam_eval(w, h, bp).volume;
  };
  p.constraints = {[split, bp](const Vector& x) {
                     auto [w, h] = split(x);
                     return beam_eval(w, h, bp).tip_margin;
                   },
                   [split, bp](const Vector& x) {
                     auto [w, h] = split(x);
                     return beam_eval(w, h, bp).agg_stress;
                   }};
  p.noise_sd = noise_sd;
  return p;
}

}  // namespace lcbo
