#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "gridcert/lyapunov.hpp"
#include "gridcert/state_space.hpp"

namespace gridcert {

enum class VminMethod { exact, convex, approx };
enum class VminStatus { ok, degraded, unsupported };

struct VminResult {
  VminMethod method = VminMethod::exact;
  VminStatus status = VminStatus::ok;
  double value = 0;
  Eigen::VectorXd witness;  // minimizing boundary state (empty for approx)
  int facet_edge = -1;
  int facet_sign = 0;
  std::string note;
};

struct VminOptions {
  int starts_per_facet = 20;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  double velocity_box = 3.0;  // random-seed range for velocities
};

// Smallest V-bar over the outward-flowing part of the polytope boundary,
// by multistart local minimization per facet.
[[nodiscard]] VminResult vmin_exact(const StateSpaceModel& sys,
                                    const Certificate& cert,
                                    const VminOptions& options = {});

// Smallest V-bar over the boundary of the convexity region |delta_e| = pi/2
// (flow direction dropped; conservative). Requires |delta*_e| < pi/2.
[[nodiscard]] VminResult vmin_convex(const StateSpaceModel& sys,
                                     const Certificate& cert);

// Closed-form lower bound per facet; requires Q invertible (mu > 0).
[[nodiscard]] VminResult vmin_approx(const StateSpaceModel& sys,
                                     const Certificate& cert);

// Largest outward flow rate delta_e * ddelta_e over boundary states with
// V-bar <= v; negative means the sublevel set clears the boundary.
[[nodiscard]] double g_of_v(const StateSpaceModel& sys, const Certificate& cert,
                            double v, const VminOptions& options = {});

// Bisection on g to locate the invariance threshold, as a cross-check of
// vmin_exact. Returns the bracket midpoint at the requested relative width.
[[nodiscard]] double vmin_bisect(const StateSpaceModel& sys,
                                 const Certificate& cert, double v_lo,
                                 double v_hi, double rel_tol = 0.01,
                                 const VminOptions& options = {});

// Membership in the certified invariant set for this estimate. Convex
// estimates check the convexity region, the others the decay polytope.
[[nodiscard]] bool in_invariant_set(const StateSpaceModel& sys,
                                    const Certificate& cert,
                                    const VminResult& vmin,
                                    const Eigen::VectorXd& x);

}  // namespace gridcert
