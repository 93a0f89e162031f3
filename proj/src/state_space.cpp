#include "gridcert/state_space.hpp"

#include <cmath>
#include <numbers>

namespace gridcert {

Eigen::VectorXd StateSpaceModel::edge_angles(const Eigen::VectorXd& x) const {
  return eq_delta + c_mat * x;
}

Eigen::VectorXd StateSpaceModel::nonlinearity(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd actual = edge_angles(x);
  return actual.array().sin() - eq_delta.array().sin();
}

Eigen::VectorXd StateSpaceModel::rhs(const Eigen::VectorXd& x) const {
  return a_mat * x - b_mat * nonlinearity(x);
}

Eigen::MatrixXd StateSpaceModel::rhs_jacobian(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd cosines = edge_angles(x).array().cos();
  return a_mat - b_mat * cosines.asDiagonal() * c_mat;
}

bool StateSpaceModel::in_polytope(const Eigen::VectorXd& x) const {
  return polytope_slack(x) > 0.0;
}

bool StateSpaceModel::in_convexity_region(const Eigen::VectorXd& x) const {
  return (edge_angles(x).cwiseAbs().array() <= std::numbers::pi / 2).all();
}

double StateSpaceModel::polytope_slack(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd shifted = edge_angles(x) + eq_delta;
  return std::numbers::pi - shifted.cwiseAbs().maxCoeff();
}

std::vector<Facet> StateSpaceModel::facets() const {
  std::vector<Facet> out;
  out.reserve(2 * static_cast<std::size_t>(m));
  for (int e = 0; e < m; ++e) {
    for (int sign : {+1, -1}) {
      out.push_back({e, sign, sign * std::numbers::pi - eq_delta(e)});
    }
  }
  return out;
}

StateSpaceModel build_state_space(const PowerNetwork& net,
                                  const Equilibrium& eq) {
  if (!eq.converged)
    throw ModelError("state space requires a converged equilibrium");
  StateSpaceModel sys;
  sys.n = net.state_size();
  sys.m = static_cast<int>(net.edges.size());
  const int n = sys.n;
  const int m = sys.m;

  sys.incidence = Eigen::MatrixXd::Zero(m, n);
  sys.edge_weight.resize(m);
  sys.eq_delta.resize(m);
  for (int e = 0; e < m; ++e) {
    const Edge& edge = net.edges[e];
    const int ik = net.state_index(edge.k);
    const int ij = net.state_index(edge.j);
    if (ik >= 0) sys.incidence(e, ik) = 1.0;
    if (ij >= 0) sys.incidence(e, ij) = -1.0;
    sys.edge_weight(e) = net.edge_weight(edge);
    sys.eq_delta(e) = eq.edge_deltas[e];
  }
  sys.eq_angles = eq.angles;

  sys.inertia.resize(n);
  sys.damping.resize(n);
  sys.power.resize(n);
  int i = 0;
  for (int id : net.state_ids()) {
    const Generator& g = net.by_id(id);
    sys.inertia(i) = g.inertia_m;
    sys.damping(i) = g.damping_d;
    sys.power(i) = g.power_p;
    ++i;
  }

  const Eigen::VectorXd inv_m = sys.inertia.cwiseInverse();
  sys.a_mat = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  sys.a_mat.topRightCorner(n, n).setIdentity();
  sys.a_mat.bottomRightCorner(n, n) =
      (-inv_m.array() * sys.damping.array()).matrix().asDiagonal();

  sys.b_mat = Eigen::MatrixXd::Zero(2 * n, m);
  sys.b_mat.bottomRows(n) =
      inv_m.asDiagonal() * sys.incidence.transpose() *
      sys.edge_weight.asDiagonal();

  sys.c_mat = Eigen::MatrixXd::Zero(m, 2 * n);
  sys.c_mat.leftCols(n) = sys.incidence;
  return sys;
}

bool sector_bound_holds(double delta, double delta_star) {
  const double dev = delta - delta_star;
  const double lhs = dev * (std::sin(delta) - std::sin(delta_star));
  return lhs >= -1e-12 && lhs <= dev * dev + 1e-12;
}

}  // namespace gridcert
