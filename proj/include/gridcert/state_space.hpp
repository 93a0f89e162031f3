#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridcert/equilibrium.hpp"
#include "gridcert/model.hpp"

namespace gridcert {

// One boundary piece of the decay polytope: |delta_e + delta*_e| = pi with
// the given sign, i.e. the actual difference sits at theta = sign*pi - delta*_e.
struct Facet {
  int edge = 0;
  int sign = +1;
  double theta = 0.0;
};

// State-space form around an equilibrium. The state is
// x = [angle deviations from the equilibrium; angular velocities].
struct StateSpaceModel {
  Eigen::MatrixXd a_mat;       // 2n x 2n
  Eigen::MatrixXd b_mat;       // 2n x m
  Eigen::MatrixXd c_mat;       // m x 2n
  Eigen::MatrixXd incidence;   // m x n, rows follow the canonical edge order
  Eigen::VectorXd edge_weight; // B_kj V_k V_j per edge
  Eigen::VectorXd eq_delta;    // delta*_e per edge
  Eigen::VectorXd eq_angles;   // delta*_k per state generator
  Eigen::VectorXd inertia;
  Eigen::VectorXd damping;
  Eigen::VectorXd power;       // P_k per state generator
  int n = 0;
  int m = 0;  // edge count

  // Actual angle differences delta_e = delta*_e + (C x)_e.
  [[nodiscard]] Eigen::VectorXd edge_angles(const Eigen::VectorXd& x) const;
  // F(Cx): per-edge sin(delta_e) - sin(delta*_e).
  [[nodiscard]] Eigen::VectorXd nonlinearity(const Eigen::VectorXd& x) const;
  // dx/dt = A x - B F(C x).
  [[nodiscard]] Eigen::VectorXd rhs(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::MatrixXd rhs_jacobian(const Eigen::VectorXd& x) const;

  // Open decay region: |delta_e + delta*_e| < pi for every edge.
  [[nodiscard]] bool in_polytope(const Eigen::VectorXd& x) const;
  // Convexity region: |delta_e| <= pi/2 for every edge.
  [[nodiscard]] bool in_convexity_region(const Eigen::VectorXd& x) const;
  // Signed slack of the polytope: min over edges of pi - |delta_e + delta*_e|.
  [[nodiscard]] double polytope_slack(const Eigen::VectorXd& x) const;

  [[nodiscard]] std::vector<Facet> facets() const;  // both signs per edge
};

[[nodiscard]] StateSpaceModel build_state_space(const PowerNetwork& net,
                                                const Equilibrium& eq);

// Two-sided sector inequality for one edge: within the sector region,
// 0 <= (d - ds)(sin d - sin ds) <= (d - ds)^2.
[[nodiscard]] bool sector_bound_holds(double delta, double delta_star);

}  // namespace gridcert
