#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridcert/lyapunov.hpp"
#include "gridcert/vmin.hpp"

namespace gridcert {

// A fault-cleared state: actual rotor angles and velocities per state
// generator, in the model's generator order.
struct Contingency {
  std::string label;
  Eigen::VectorXd angles;
  Eigen::VectorXd velocities;
};

[[nodiscard]] std::vector<Contingency> parse_contingencies(
    const std::string& json_text);
[[nodiscard]] std::string serialize_contingencies(
    const std::vector<Contingency>& list);

// Deviation state x for a contingency, given the equilibrium the system was
// built around.
[[nodiscard]] Eigen::VectorXd contingency_state(const StateSpaceModel& sys,
                                                const Contingency& c);

enum class Outcome { certified, undecided };

struct ScreeningVerdict {
  std::string label;
  Outcome outcome = Outcome::undecided;
  double v_at_state = 0;
  double vmin_value = 0;
  VminMethod method = VminMethod::exact;
  std::string reason;  // "inside invariant set", "outside polytope", ...
};

// One-shot screening against a fixed certificate and V_min estimate.
// Never declares instability; failures to certify come back undecided.
[[nodiscard]] ScreeningVerdict screen(const StateSpaceModel& sys,
                                      const Certificate& cert,
                                      const VminResult& vmin,
                                      const Contingency& c);

struct AdaptOptions {
  int max_iterations = 50;
  double eps0_rel = 0.5;      // times the first V_min
  double eps_min_rel = 1e-4;  // times the first V_min
  // Re-solves per level bound: each round pins the previous round's boundary
  // minimizer from below, so the boundary minimum climbs instead of moving.
  int inner_rounds = 6;
  // Estimator driving the shrink schedule. Unset = convex when the state lies
  // in the convexity region, exact otherwise.
  std::optional<VminMethod> schedule_method;
  std::uint64_t seed = 0;
  SdpSettings solver;
  VminOptions vmin_options;
  bool final_exact_pass = true;
};

struct AdaptStep {
  int iteration = 0;
  double vmin = 0;
  double v_at_state = 0;
  double eps = 0;
  double margin = 0;
  bool accepted = false;  // solver produced a certificate this round
};

struct AdaptResult {
  Outcome outcome = Outcome::undecided;
  std::string status;  // certified | initial_infeasible | outside_polytope |
                       // eps_exhausted | max_iterations
  Certificate cert;
  VminResult final_vmin;
  double final_v_at_state = 0;
  std::vector<AdaptStep> steps;
};

// Iterative certificate adaptation toward a specific contingency: re-solve
// the family with V-bar(x0) pushed below the previous V_min minus eps,
// halving eps on infeasibility.
[[nodiscard]] AdaptResult adapt(const LmiProblem& base,
                                const Contingency& c,
                                const AdaptOptions& options = {});

[[nodiscard]] std::vector<ScreeningVerdict> batch_screen(
    const StateSpaceModel& sys, const Certificate& cert,
    const VminResult& vmin, const std::vector<Contingency>& list);

}  // namespace gridcert
