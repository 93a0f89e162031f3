#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridcert/sdp.hpp"
#include "gridcert/state_space.hpp"

namespace gridcert {

// One member of the Lyapunov-function family:
//   V(x) = 1/2 x'Qx - sum_e K_e (cos delta_e + delta_e sin delta*_e).
struct Certificate {
  Eigen::MatrixXd q;   // 2n x 2n, symmetric PSD
  Eigen::VectorXd k;   // per edge, >= kappa_min for solver output
  Eigen::VectorXd h;   // per edge multiplier, >= 0
  double margin = 0;   // decay margin on the reduced block
  double mu = 0;
  double kappa_min = 0;
  std::string source;  // "solver", "energy", "file"
};

// Extra affine restriction  <q_coeff, Q> + k_coeff . K <= bound  used by the
// adaptation loop (the left side is V-bar at a fixed state).
struct CertificateConstraint {
  Eigen::MatrixXd q_coeff;
  Eigen::VectorXd k_coeff;
  double bound = 0;
};

struct LmiProblem {
  StateSpaceModel sys;
  double mu = 1e-6;           // lower bound Q >= mu*I
  double kappa_min = 0;       // default 1e-4 * max edge weight
  double trace_target = 0;    // trace(Q) normalization, default 2n
  std::vector<CertificateConstraint> extras;
};

[[nodiscard]] LmiProblem assemble_lmi(const StateSpaceModel& sys,
                                      double mu = 1e-6);

// Full (2n+m) x (2n+m) block matrix whose negative semidefiniteness encodes
// decay of V along trajectories inside the polytope.
[[nodiscard]] Eigen::MatrixXd lmi_block(const StateSpaceModel& sys,
                                        const Eigen::MatrixXd& q,
                                        const Eigen::VectorXd& k,
                                        const Eigen::VectorXd& h);
[[nodiscard]] Eigen::MatrixXd lmi_block(const StateSpaceModel& sys,
                                        const Certificate& cert);

enum class CandidateStatus { found, infeasible, timeout };

struct CandidateResult {
  CandidateStatus status = CandidateStatus::infeasible;
  Certificate cert;
  SdpResult solver;
};

// Margin-maximizing member of the family (deterministic).
[[nodiscard]] CandidateResult find_candidate(const LmiProblem& problem,
                                             const SdpSettings& settings = {});

// Feasible member under a seeded random linear objective, used to exercise
// the family away from the margin optimum. Deterministic per seed.
[[nodiscard]] CandidateResult find_candidate_randomized(
    const LmiProblem& problem, std::uint64_t seed,
    const SdpSettings& settings = {});

// Member maximizing the smallest of several linear functionals
// q_coeff . Q + k_coeff . K (each direction's bound is ignored), minus the
// penalty functional when one is given. Level-set adaptation maximizes
// min over boundary minimizers seen so far of V(w) - V(x0): the gap between
// the boundary minimum and the level of the state being screened.
[[nodiscard]] CandidateResult find_candidate_directed(
    const LmiProblem& problem,
    const std::vector<CertificateConstraint>& directions,
    const CertificateConstraint* penalty = nullptr,
    const SdpSettings& settings = {});

// Closed-form classical-energy member: Q = blkdiag(0, M), K = edge weights,
// H = 0. Its V equals the swing-energy function up to an additive constant.
[[nodiscard]] Certificate energy_member(const StateSpaceModel& sys);

// Raw V(x); V(0) is generally nonzero.
[[nodiscard]] double evaluate_v_raw(const StateSpaceModel& sys,
                                    const Certificate& cert,
                                    const Eigen::VectorXd& x);
// Shifted V-bar(x) = V(x) - V(0), zero at the equilibrium, computed without
// cancellation through per-edge potential terms.
[[nodiscard]] double evaluate_v(const StateSpaceModel& sys,
                                const Certificate& cert,
                                const Eigen::VectorXd& x);
[[nodiscard]] Eigen::VectorXd evaluate_v_gradient(const StateSpaceModel& sys,
                                                  const Certificate& cert,
                                                  const Eigen::VectorXd& x);
// Time derivative of V along the vector field.
[[nodiscard]] double evaluate_vdot(const StateSpaceModel& sys,
                                   const Certificate& cert,
                                   const Eigen::VectorXd& x);

// Shifted per-edge potential term; nonnegative inside the decay polytope.
[[nodiscard]] double edge_potential(const StateSpaceModel& sys, int edge,
                                    double delta);

[[nodiscard]] std::string serialize_certificate(const Certificate& cert);
[[nodiscard]] Certificate parse_certificate(const std::string& json_text);

}  // namespace gridcert
