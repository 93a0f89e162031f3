#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace gridcert {

// One positive-semidefinite constraint F(y) = F0 + sum_i y_i * B_i >= 0.
// Coefficients are stored sparsely per variable; an entry (r, c, v) with
// r != c implies the mirrored entry as well.
struct AffineBlock {
  struct Entry {
    int row = 0;
    int col = 0;
    double value = 0;
  };
  struct Term {
    int var = 0;
    std::vector<Entry> entries;
  };

  int dim = 0;
  Eigen::MatrixXd constant;
  std::vector<Term> terms;

  [[nodiscard]] Eigen::MatrixXd eval(const Eigen::VectorXd& y) const;
};

// Build a block by probing a dense affine map at 0 and at unit vectors.
// Robust against index bookkeeping mistakes; cost is negligible at our sizes.
[[nodiscard]] AffineBlock block_from_map(
    int num_vars, const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& map);

// maximize objective . y
//   s.t. every block is positive semidefinite and eq_a * y = eq_b.
struct SdpProblem {
  int num_vars = 0;
  std::vector<AffineBlock> blocks;
  Eigen::MatrixXd eq_a;     // 0 x n when absent
  Eigen::VectorXd eq_b;
  Eigen::VectorXd objective;
  Eigen::VectorXd start;    // optional interior hint (must satisfy equalities)
};

enum class SdpStatus { optimal, infeasible, inaccurate, timeout };

struct SdpSettings {
  double gap_tol = 1e-8;        // absolute complementarity target
  double newton_tol = 1e-11;    // half squared Newton decrement
  double barrier_growth = 10.0;
  int max_stage_newton = 80;    // Newton iterations per centering
  int max_stages = 60;
  double max_barrier = 1e12;
  double time_limit_s = 0;      // 0 = unlimited
  double phase1_margin = 1e-7;  // how strictly phase I must clear zero
};

struct SdpResult {
  SdpStatus status = SdpStatus::infeasible;
  Eigen::VectorXd y;
  double objective = 0;
  double gap = 0;
  double min_block_eig = 0;   // over all blocks at the returned point
  double eq_residual = 0;
  int newton_iterations = 0;
  std::string message;
};

[[nodiscard]] SdpResult solve_sdp(const SdpProblem& problem,
                                  const SdpSettings& settings = {});

}  // namespace gridcert
