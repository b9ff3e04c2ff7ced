#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcbo/logsumexp.hpp"
#include "lcbo/problem.hpp"

namespace lcbo {

struct TrussNode {
  int id = 0;
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  std::array<bool, 3> fixed{false, false, false};
};

struct TrussGeometry {
  std::vector<TrussNode> nodes;
  std::vector<std::pair<int, int>> elements;  // node ids
  std::map<int, Eigen::Vector3d> loads;       // node id -> force
  double youngs = 1e7;
  double density = 0.1;
  double stress_max = 4e4;
  double disp_max = 0.35;
  double area_lo = 0.01;
  double area_hi = 5.0;
  double lse_alpha = 20.0;

  int node_index(int id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    throw std::invalid_argument("truss: unknown node id " + std::to_string(id));
  }

  int num_free_dofs() const {
    int n = 0;
    for (const auto& nd : nodes)
      for (int a = 0; a < 3; ++a)
        if (!nd.fixed[static_cast<std::size_t>(a)]) ++n;
    return n;
  }

  double member_length(std::size_t e) const {
    const auto& [i, j] = elements[e];
    return (nodes[static_cast<std::size_t>(node_index(j))].pos -
            nodes[static_cast<std::size_t>(node_index(i))].pos)
        .norm();
  }
};

/// Parses the whitespace-delimited sectioned geometry format
/// ([nodes]/[elements]/[loads]/[material]/[limits], '#' comments).
inline TrussGeometry parse_truss(std::istream& in) {
  TrussGeometry g;
  std::string line, section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.front() == '[') {
      section = first;
      continue;
    }
    std::istringstream row(line);
    if (section == "[nodes]") {
      TrussNode n;
      int fx, fy, fz;
      if (!(row >> n.id >> n.pos(0) >> n.pos(1) >> n.pos(2) >> fx >> fy >> fz))
        throw std::invalid_argument("truss: malformed node row: " + line);
      n.fixed = {fx != 0, fy != 0, fz != 0};
      g.nodes.push_back(n);
    } else if (section == "[elements]") {
      int a, b;
      if (!(row >> a >> b)) throw std::invalid_argument("truss: malformed element row: " + line);
      g.elements.emplace_back(a, b);
    } else if (section == "[loads]") {
      int id;
      Eigen::Vector3d f;
      if (!(row >> id >> f(0) >> f(1) >> f(2)))
        throw std::invalid_argument("truss: malformed load row: " + line);
      g.loads[id] = f;
    } else if (section == "[material]") {
      if (!(row >> g.youngs >> g.density))
        throw std::invalid_argument("truss: malformed material row: " + line);
    } else if (section == "[limits]") {
      if (!(row >> g.stress_max >> g.disp_max >> g.area_lo >> g.area_hi))
        throw std::invalid_argument("truss: malformed limits row: " + line);
    } else {
      throw std::invalid_argument("truss: data outside a known section: " + line);
    }
  }
  if (g.nodes.empty() || g.elements.empty())
    throw std::invalid_argument("truss: geometry file needs nodes and elements");
  return g;
}

inline TrussGeometry load_truss(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("truss: cannot open geometry file " + path);
  return parse_truss(in);
}

struct TrussResponse {
  double weight = 0.0;
  Vector member_stress;  // per element, psi
  Vector free_disp;      // per free dof, in
  double agg_stress = 0.0;
  double agg_disp = 0.0;
};

/// Linear elastic response of the pin-jointed space truss: assembles the
/// reduced stiffness matrix over free DOFs, solves K u = F, and reports
/// member stresses, free-node displacements and their LogSumExp-aggregated
/// normalized margins (|sigma|/stress_max - 1, |u|/disp_max - 1).
inline TrussResponse truss_eval(const TrussGeometry& g, const Vector& areas) {
  const auto ne = static_cast<Eigen::Index>(g.elements.size());
  if (areas.size() != ne) throw std::invalid_argument("truss_eval: one area per element required");
  for (Eigen::Index e = 0; e < ne; ++e)
    if (areas(e) < g.area_lo || areas(e) > g.area_hi)
      throw std::invalid_argument("truss_eval: area outside bounds");

  // free-DOF numbering
  std::vector<int> dof_map(g.nodes.size() * 3, -1);
  int nf = 0;
  for (std::size_t n = 0; n < g.nodes.size(); ++n)
    for (int a = 0; a < 3; ++a)
      if (!g.nodes[n].fixed[static_cast<std::size_t>(a)]) dof_map[3 * n + static_cast<std::size_t>(a)] = nf++;

  Matrix K = Matrix::Zero(nf, nf);
  TrussResponse resp;
  resp.weight = 0.0;
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto ia = static_cast<std::size_t>(g.node_index(g.elements[static_cast<std::size_t>(e)].first));
    const auto ib = static_cast<std::size_t>(g.node_index(g.elements[static_cast<std::size_t>(e)].second));
    const Eigen::Vector3d delta = g.nodes[ib].pos - g.nodes[ia].pos;
    const double L = delta.norm();
    const Eigen::Vector3d dir = delta / L;
    const double kax = g.youngs * areas(e) / L;
    resp.weight += g.density * areas(e) * L;

    const int dofs[6] = {dof_map[3 * ia + 0], dof_map[3 * ia + 1], dof_map[3 * ia + 2],
                         dof_map[3 * ib + 0], dof_map[3 * ib + 1], dof_map[3 * ib + 2]};
    for (int r = 0; r < 6; ++r) {
      if (dofs[r] < 0) continue;
      const double dr = dir(r % 3) * (r < 3 ? 1.0 : -1.0);
      for (int c = 0; c < 6; ++c) {
        if (dofs[c] < 0) continue;
        const double dc = dir(c % 3) * (c < 3 ? 1.0 : -1.0);
        K(dofs[r], dofs[c]) += kax * dr * dc;
      }
    }
  }

  Vector F = Vector::Zero(nf);
  for (const auto& [id, force] : g.loads) {
    const auto n = static_cast<std::size_t>(g.node_index(id));
    for (int a = 0; a < 3; ++a) {
      const int dof = dof_map[3 * n + static_cast<std::size_t>(a)];
      if (dof >= 0) F(dof) += force(a);
    }
  }

  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("truss_eval: singular reduced stiffness matrix");
  resp.free_disp = llt.solve(F);

  resp.member_stress.resize(ne);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto ia = static_cast<std::size_t>(g.node_index(g.elements[static_cast<std::size_t>(e)].first));
    const auto ib = static_cast<std::size_t>(g.node_index(g.elements[static_cast<std::size_t>(e)].second));
    const Eigen::Vector3d delta = g.nodes[ib].pos - g.nodes[ia].pos;
    const double L = delta.norm();
    const Eigen::Vector3d dir = delta / L;
    Eigen::Vector3d ua = Eigen::Vector3d::Zero(), ub = Eigen::Vector3d::Zero();
    for (int a = 0; a < 3; ++a) {
      const int da = dof_map[3 * ia + static_cast<std::size_t>(a)];
      const int db = dof_map[3 * ib + static_cast<std::size_t>(a)];
      if (da >= 0) ua(a) = resp.free_disp(da);
      if (db >= 0) ub(a) = resp.free_disp(db);
    }
    resp.member_stress(e) = g.youngs / L * dir.dot(ub - ua);
  }

  resp.agg_stress = lse_aggregate(
      (resp.member_stress.cwiseAbs() / g.stress_max).array() - 1.0, g.lse_alpha);
  resp.agg_disp =
      lse_aggregate((resp.free_disp.cwiseAbs() / g.disp_max).array() - 1.0, g.lse_alpha);
  return resp;
}

/// Weight-minimization problem over member areas with the two aggregated
/// inequality constraints of the benchmark.
inline ProblemDef make_truss_problem(const TrussGeometry& g, double noise_sd = 0.1) {
  ProblemDef p;
  const auto d = static_cast<int>(g.elements.size());
  p.name = "truss" + std::to_string(d);
  p.dim = d;
  p.num_constraints = 2;
  p.domain = BoxDomain(Vector::Constant(d, g.area_lo), Vector::Constant(d, g.area_hi));
  p.sense = ConstraintSense::Inequality;
  p.objective = [g](const Vector& a) { return truss_eval(g, a).weight; };
  p.constraints = {[g](const Vector& a) { return truss_eval(g, a).agg_stress; },
                   [g](const Vector& a) { return truss_eval(g, a).agg_disp; }};
  p.noise_sd = noise_sd;
  return p;
}

}  // namespace lcbo
