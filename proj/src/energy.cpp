#include "gridcert/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace gridcert {
namespace {

Eigen::VectorXd edge_deltas_of(const PowerNetwork& net,
                               const Eigen::VectorXd& angles) {
  Eigen::VectorXd out(static_cast<int>(net.edges.size()));
  int e = 0;
  for (const Edge& edge : net.edges) out(e++) = edge_delta(net, angles, edge);
  return out;
}

}  // namespace

double energy_value(const PowerNetwork& net, const Equilibrium& sep,
                    const Eigen::VectorXd& angles,
                    const Eigen::VectorXd& velocities) {
  double kinetic = 0.0;
  double injection = 0.0;
  int i = 0;
  for (int id : net.state_ids()) {
    const Generator& g = net.by_id(id);
    kinetic += 0.5 * g.inertia_m * velocities(i) * velocities(i);
    injection += g.power_p * (angles(i) - sep.angles(i));
    ++i;
  }
  double magnetic = 0.0;
  int e = 0;
  for (const Edge& edge : net.edges) {
    const double d = edge_delta(net, angles, edge);
    magnetic += net.edge_weight(edge) * (std::cos(sep.edge_deltas[e]) -
                                         std::cos(d));
    ++e;
  }
  return kinetic + magnetic - injection;
}

UepSearchResult find_ueps(const PowerNetwork& net, const Equilibrium& sep,
                          const UepSearchOptions& options) {
  const int n = net.state_size();
  UepSearchResult result;
  result.starts = options.starts > 0 ? options.starts : (n <= 3 ? 500 : 5000);

  const Eigen::VectorXd zero_vel = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd sep_deltas = edge_deltas_of(net, sep.angles);
  std::vector<Eigen::VectorXd> seen_deltas;
  seen_deltas.push_back(sep_deltas);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uni(-std::numbers::pi,
                                             std::numbers::pi);
  for (int s = 0; s < result.starts; ++s) {
    Eigen::VectorXd guess(n);
    for (int i = 0; i < n; ++i) guess(i) = uni(rng);
    const Equilibrium eq = solve_equilibrium(net, &guess);
    if (!eq.converged) continue;
    ++result.converged_runs;

    const Eigen::VectorXd deltas = edge_deltas_of(net, eq.angles);
    if ((deltas - sep_deltas).cwiseAbs().maxCoeff() >
        options.max_edge_deviation) {
      continue;
    }
    bool duplicate = false;
    for (const Eigen::VectorXd& known : seen_deltas) {
      if ((deltas - known).cwiseAbs().maxCoeff() < options.dedup_tol) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    seen_deltas.push_back(deltas);

    UepCandidate cand;
    cand.angles = eq.angles;
    cand.relative_energy = energy_value(net, sep, eq.angles, zero_vel);
    cand.kind = eq.kind;
    cand.max_real_part = eq.max_real_part;
    result.equilibria.push_back(std::move(cand));
  }

  std::sort(result.equilibria.begin(), result.equilibria.end(),
            [](const UepCandidate& a, const UepCandidate& b) {
              return a.relative_energy < b.relative_energy;
            });
  for (const UepCandidate& cand : result.equilibria) {
    if (cand.kind == EquilibriumKind::uep) {
      result.critical_energy = cand.relative_energy;
      result.found_uep = true;
      break;
    }
  }
  return result;
}

double closest_uep_energy(const UepSearchResult& result) {
  return result.found_uep ? result.critical_energy
                          : std::numeric_limits<double>::quiet_NaN();
}

std::vector<EnergyGridPoint> energy_landscape(const PowerNetwork& net,
                                              const Equilibrium& sep,
                                              int samples_per_axis) {
  const int n = net.state_size();
  const bool balanced = !net.infinite_bus.has_value();
  const int free = balanced ? n - 1 : n;
  if (free < 1 || free > 2) {
    throw ModelError(
        "energy landscape supports one or two free angle coordinates");
  }
  if (samples_per_axis < 2) throw ModelError("need at least two samples");

  const Eigen::VectorXd zero_vel = Eigen::VectorXd::Zero(n);
  const double lo = -std::numbers::pi;
  const double step = 2.0 * std::numbers::pi /
                      static_cast<double>(samples_per_axis - 1);
  std::vector<EnergyGridPoint> grid;

  auto sample = [&](double a, double b) {
    Eigen::VectorXd angles = Eigen::VectorXd::Zero(n);
    angles(0) = a;
    if (free == 2) angles(1) = b;
    EnergyGridPoint p;
    p.d_first = a;
    p.d_second = free == 2 ? b : 0.0;
    p.energy = energy_value(net, sep, angles, zero_vel);
    return p;
  };

  if (free == 1) {
    grid.reserve(static_cast<std::size_t>(samples_per_axis));
    for (int i = 0; i < samples_per_axis; ++i)
      grid.push_back(sample(lo + i * step, 0.0));
  } else {
    grid.reserve(static_cast<std::size_t>(samples_per_axis) *
                 static_cast<std::size_t>(samples_per_axis));
    for (int i = 0; i < samples_per_axis; ++i) {
      for (int j = 0; j < samples_per_axis; ++j) {
        grid.push_back(sample(lo + i * step, lo + j * step));
      }
    }
  }
  return grid;
}

}  // namespace gridcert
