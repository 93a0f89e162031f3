#include "gridcert/equilibrium.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace gridcert {
namespace {

constexpr double kZeroModeTol = 1e-7;

// Signed state indices of an edge's endpoints; -1 marks the infinite bus.
struct EdgeIndex {
  int ik = -1;
  int ij = -1;
  double w = 0.0;
};

std::vector<EdgeIndex> index_edges(const PowerNetwork& net) {
  std::vector<EdgeIndex> out;
  out.reserve(net.edges.size());
  for (const Edge& e : net.edges) {
    out.push_back({net.state_index(e.k), net.state_index(e.j),
                   net.edge_weight(e)});
  }
  return out;
}

double angle_of(const Eigen::VectorXd& angles, int idx) {
  return idx < 0 ? 0.0 : angles(idx);
}

// Jacobian of the residual with respect to the state angles (n x n).
Eigen::MatrixXd residual_jacobian(const PowerNetwork& net,
                                  const std::vector<EdgeIndex>& edges,
                                  const Eigen::VectorXd& angles) {
  const int n = net.state_size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (const EdgeIndex& e : edges) {
    const double c = e.w * std::cos(angle_of(angles, e.ik) -
                                    angle_of(angles, e.ij));
    if (e.ik >= 0) jac(e.ik, e.ik) -= c;
    if (e.ij >= 0) jac(e.ij, e.ij) -= c;
    if (e.ik >= 0 && e.ij >= 0) {
      jac(e.ik, e.ij) += c;
      jac(e.ij, e.ik) += c;
    }
  }
  return jac;
}

}  // namespace

Eigen::VectorXd equilibrium_residual(const PowerNetwork& net,
                                     const Eigen::VectorXd& angles) {
  const int n = net.state_size();
  Eigen::VectorXd res(n);
  int i = 0;
  for (int id : net.state_ids()) res(i++) = net.by_id(id).power_p;
  for (const Edge& e : net.edges) {
    const int ik = net.state_index(e.k);
    const int ij = net.state_index(e.j);
    const double flow =
        net.edge_weight(e) * std::sin(angle_of(angles, ik) - angle_of(angles, ij));
    if (ik >= 0) res(ik) -= flow;
    if (ij >= 0) res(ij) += flow;
  }
  return res;
}

double edge_delta(const PowerNetwork& net, const Eigen::VectorXd& angles,
                  const Edge& e) {
  return angle_of(angles, net.state_index(e.k)) -
         angle_of(angles, net.state_index(e.j));
}

Equilibrium solve_equilibrium(const PowerNetwork& net,
                              const Eigen::VectorXd* guess,
                              const EquilibriumOptions& options) {
  validate(net);
  const int n = net.state_size();
  const bool balanced = !net.infinite_bus.has_value();
  const auto edges = index_edges(net);

  Equilibrium out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (guess != nullptr) {
    if (guess->size() != n) throw ModelError("equilibrium guess has wrong size");
    x = *guess;
  }
  // Balanced systems carry a uniform-rotation symmetry; pin the last state
  // angle (highest generator id) to zero and drop its redundant equation.
  if (balanced && n > 0) x.array() -= x(n - 1);
  const int free = balanced ? n - 1 : n;

  Eigen::VectorXd res = equilibrium_residual(net, x);
  double norm = res.lpNorm<Eigen::Infinity>();
  int iter = 0;
  bool stalled = false;
  while (norm > options.tolerance && iter < options.max_iterations && !stalled) {
    const Eigen::MatrixXd jac = residual_jacobian(net, edges, x);
    const Eigen::VectorXd step =
        jac.topLeftCorner(free, free)
            .colPivHouseholderQr()
            .solve(-res.head(free));
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      Eigen::VectorXd trial = x;
      trial.head(free) += lambda * step;
      const Eigen::VectorXd trial_res = equilibrium_residual(net, trial);
      const double trial_norm = trial_res.lpNorm<Eigen::Infinity>();
      if (trial_norm < norm) {
        x = trial;
        res = trial_res;
        norm = trial_norm;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    stalled = !improved;
    ++iter;
  }

  out.iterations = iter;
  out.residual_inf = norm;
  out.converged = norm <= options.tolerance;
  out.angles = x;
  out.edge_deltas.reserve(net.edges.size());
  for (const Edge& e : net.edges)
    out.edge_deltas.push_back(edge_delta(net, x, e));

  if (!out.converged) return out;

  // Classify through the linearized swing dynamics around the solution.
  Eigen::MatrixXd minv_l(n, n), minv_d(n, n);
  {
    const Eigen::MatrixXd lap = -residual_jacobian(net, edges, x);
    Eigen::VectorXd inv_m(n), d(n);
    int i = 0;
    for (int id : net.state_ids()) {
      const Generator& g = net.by_id(id);
      inv_m(i) = 1.0 / g.inertia_m;
      d(i) = g.damping_d;
      ++i;
    }
    minv_l = inv_m.asDiagonal() * lap;
    minv_d = (inv_m.array() * d.array()).matrix().asDiagonal();
  }
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  big.topRightCorner(n, n).setIdentity();
  big.bottomLeftCorner(n, n) = -minv_l;
  big.bottomRightCorner(n, n) = -minv_d;
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(big);

  int zero_modes = 0;
  double max_real = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < eig.eigenvalues().size(); ++i) {
    const std::complex<double> lam = eig.eigenvalues()(i);
    if (std::abs(lam) < kZeroModeTol) {
      ++zero_modes;
    } else {
      max_real = std::max(max_real, lam.real());
    }
  }
  out.zero_modes = zero_modes;
  out.max_real_part = max_real;
  const int expected_zero = balanced ? 1 : 0;
  if (zero_modes != expected_zero) {
    out.kind = EquilibriumKind::degenerate;
  } else if (max_real > kZeroModeTol) {
    out.kind = EquilibriumKind::uep;
  } else {
    out.kind = EquilibriumKind::sep;
  }

  for (std::size_t ei = 0; ei < net.edges.size(); ++ei) {
    if (std::abs(out.edge_deltas[ei]) >= std::numbers::pi / 2 - 1e-12) {
      const Edge& e = net.edges[ei];
      out.warnings.push_back("edge " + std::to_string(e.k) + "-" +
                             std::to_string(e.j) +
                             " equilibrium angle magnitude reaches pi/2; "
                             "convexity-region estimate unavailable");
    }
  }
  return out;
}

}  // namespace gridcert
