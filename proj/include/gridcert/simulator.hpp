#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "gridcert/state_space.hpp"

namespace gridcert {

enum class SimStatus { converged, diverged, horizon_reached, step_failure };

struct IntegrateOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double horizon = 200.0;
  bool fixed_step = false;   // classic RK4 cross-check mode
  double fixed_dt = 1e-3;
  double settle_tol = 1e-3;  // on edge deviations and velocities
  double settle_window = 5.0;
  bool store_states = true;
  long max_steps = 50'000'000;
};

struct Trajectory {
  std::vector<double> times;            // accepted steps
  std::vector<Eigen::VectorXd> states;  // empty unless store_states
  Eigen::VectorXd final_state;
  double end_time = 0.0;
  SimStatus status = SimStatus::horizon_reached;
  long accepted = 0;
  long rejected = 0;
};

// Shift-invariant distance to the equilibrium: max over edge deviations and
// angular velocities.
[[nodiscard]] double settle_metric(const StateSpaceModel& sys,
                                   const Eigen::VectorXd& x);

// Adaptive Dormand-Prince 5(4), or fixed-step RK4 when requested. Stops
// early on sustained convergence or on divergence (|delta_e| > 10*pi).
[[nodiscard]] Trajectory integrate(const StateSpaceModel& sys,
                                   const Eigen::VectorXd& x0,
                                   const IntegrateOptions& options = {});

// True iff the run settled at the equilibrium the system was built around.
[[nodiscard]] bool converged_to(const StateSpaceModel& sys,
                                const Trajectory& traj, double tol = 1e-3);

struct MonitorReport {
  std::vector<double> values;      // scalar function along stored states
  double max_increase = 0.0;       // most positive single-step change
  int first_outside_polytope = -1; // index, or -1 if it never left
};

// Evaluate a scalar function (e.g. a Lyapunov function) along a stored
// trajectory and report monotonicity violations.
[[nodiscard]] MonitorReport monitor_along(
    const StateSpaceModel& sys, const Trajectory& traj,
    const std::function<double(const Eigen::VectorXd&)>& value);

}  // namespace gridcert
