#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gridcert/equilibrium.hpp"
#include "gridcert/model.hpp"

namespace gridcert {

// Closed-form energy of the lossless swing dynamics, relative to the SEP:
// kinetic + sum_e w_e (cos delta*_e - cos delta_e) - sum_k P_k (delta_k - delta*_k).
[[nodiscard]] double energy_value(const PowerNetwork& net, const Equilibrium& sep,
                                  const Eigen::VectorXd& angles,
                                  const Eigen::VectorXd& velocities);

struct UepCandidate {
  Eigen::VectorXd angles;      // reference-pinned like Equilibrium
  double relative_energy = 0;  // potential energy above the SEP
  EquilibriumKind kind = EquilibriumKind::degenerate;
  double max_real_part = 0;
};

struct UepSearchResult {
  std::vector<UepCandidate> equilibria;  // deduplicated, energy-ascending
  double critical_energy = 0;            // lowest UEP energy
  bool found_uep = false;
  int starts = 0;
  int converged_runs = 0;
};

struct UepSearchOptions {
  int starts = 0;          // 0 = pick from system size (500 small, 5000 large)
  std::uint64_t seed = 0;
  double dedup_tol = 1e-6; // on edge-difference vectors
  // Keep only equilibria in the principal cell around the SEP.
  double max_edge_deviation = 2.0 * 3.14159265358979323846;
};

// Multistart damped Newton over random angle seeds in [-pi, pi]^n.
[[nodiscard]] UepSearchResult find_ueps(const PowerNetwork& net,
                                        const Equilibrium& sep,
                                        const UepSearchOptions& options = {});

[[nodiscard]] double closest_uep_energy(const UepSearchResult& result);

struct EnergyGridPoint {
  double d_first = 0;  // first free coordinate (see energy_landscape)
  double d_second = 0; // second coordinate, or 0 for one-dimensional systems
  double energy = 0;
};

// Potential-energy surface over angle differences; supported for systems with
// one or two free difference coordinates (everything the bundled cases need).
[[nodiscard]] std::vector<EnergyGridPoint> energy_landscape(
    const PowerNetwork& net, const Equilibrium& sep, int samples_per_axis);

}  // namespace gridcert
