#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridcert/model.hpp"

namespace gridcert {

enum class EquilibriumKind { sep, uep, degenerate };

// A synchronous operating point. Angles are per state generator (ascending
// id); the infinite bus sits at angle zero, and for balanced systems the
// highest-id generator is pinned to zero as phase reference.
struct Equilibrium {
  Eigen::VectorXd angles;
  std::vector<double> edge_deltas;  // delta_k - delta_j per canonical edge
  double residual_inf = 0.0;
  int iterations = 0;
  bool converged = false;
  EquilibriumKind kind = EquilibriumKind::degenerate;
  double max_real_part = 0.0;  // linearization, zero mode excluded
  int zero_modes = 0;
  std::vector<std::string> warnings;
};

struct EquilibriumOptions {
  double tolerance = 1e-10;  // infinity norm of the mismatch
  int max_iterations = 100;
};

// Active-power mismatch at every state generator for the given angles.
[[nodiscard]] Eigen::VectorXd equilibrium_residual(const PowerNetwork& net,
                                                   const Eigen::VectorXd& angles);

[[nodiscard]] double edge_delta(const PowerNetwork& net,
                                const Eigen::VectorXd& angles, const Edge& e);

// Damped Newton with step halving. A null guess starts from flat angles.
[[nodiscard]] Equilibrium solve_equilibrium(
    const PowerNetwork& net, const Eigen::VectorXd* guess = nullptr,
    const EquilibriumOptions& options = {});

}  // namespace gridcert
