#include "gridcert/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace gridcert {

Eigen::MatrixXd AffineBlock::eval(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd out = constant;
  for (const Term& term : terms) {
    const double w = y(term.var);
    if (w == 0.0) continue;
    for (const Entry& e : term.entries) {
      out(e.row, e.col) += w * e.value;
      if (e.row != e.col) out(e.col, e.row) += w * e.value;
    }
  }
  return out;
}

AffineBlock block_from_map(
    int num_vars,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& map) {
  AffineBlock block;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(num_vars);
  {
    const Eigen::MatrixXd f0 = map(y);
    block.dim = static_cast<int>(f0.rows());
    block.constant = 0.5 * (f0 + f0.transpose());
  }
  for (int i = 0; i < num_vars; ++i) {
    y(i) = 1.0;
    const Eigen::MatrixXd fi = map(y);
    y(i) = 0.0;
    const Eigen::MatrixXd bi =
        0.5 * (fi + fi.transpose()) - block.constant;
    AffineBlock::Term term;
    term.var = i;
    for (int r = 0; r < block.dim; ++r) {
      for (int c = r; c < block.dim; ++c) {
        if (bi(r, c) != 0.0) term.entries.push_back({r, c, bi(r, c)});
      }
    }
    if (!term.entries.empty()) block.terms.push_back(std::move(term));
  }
  return block;
}

namespace {

using Clock = std::chrono::steady_clock;

// Block in the reduced (equality-free) variables, with one dense coefficient
// matrix per variable.
struct RBlock {
  int dim = 0;
  Eigen::MatrixXd constant;
  std::vector<Eigen::MatrixXd> basis;

  [[nodiscard]] Eigen::MatrixXd at(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd f = constant;
    for (std::size_t j = 0; j < basis.size(); ++j) {
      if (z(static_cast<int>(j)) != 0.0)
        f += z(static_cast<int>(j)) * basis[j];
    }
    return f;
  }
};

bool cholesky_logdet(const Eigen::MatrixXd& f, Eigen::LLT<Eigen::MatrixXd>& llt,
                     double& logdet) {
  llt.compute(f);
  if (llt.info() != Eigen::Success) return false;
  logdet = 0.0;
  const auto& packed = llt.matrixLLT();
  for (int i = 0; i < f.rows(); ++i) {
    const double d = packed(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    logdet += 2.0 * std::log(d);
  }
  return true;
}

struct BarrierOutcome {
  Eigen::VectorXd z;
  int newton_iterations = 0;
  double gap = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  bool converged = false;
  bool timed_out = false;
  std::string note;
};

// Path-following barrier method over PSD blocks:
//   minimize -t * c.z - sum_b log det F_b(z), t growing geometrically.
// The start must be strictly feasible.
BarrierOutcome barrier_solve(
    const std::vector<RBlock>& blocks, const Eigen::VectorXd& c,
    Eigen::VectorXd z, const SdpSettings& settings, Clock::time_point deadline,
    bool use_deadline,
    const std::function<bool(const Eigen::VectorXd&)>& early_stop) {
  const int r = static_cast<int>(z.size());
  BarrierOutcome out;
  out.z = z;

  double nu = 0.0;
  for (const RBlock& b : blocks) nu += b.dim;

  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts(blocks.size());
  std::vector<double> logdets(blocks.size());
  auto refactor = [&](const Eigen::VectorXd& point) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (!cholesky_logdet(blocks[b].at(point), llts[b], logdets[b]))
        return false;
    }
    return true;
  };
  if (!refactor(z)) {
    out.note = "start not strictly feasible";
    return out;
  }

  double t = 1.0;
  for (int stage = 0; stage < settings.max_stages; ++stage) {
    auto phi = [&](double obj_dot, const std::vector<double>& lds) {
      double p = -t * obj_dot;
      for (double ld : lds) p -= ld;
      return p;
    };
    double obj_dot = c.dot(z);
    double phi_cur = phi(obj_dot, logdets);
    bool centered = false;

    for (int iter = 0; iter < settings.max_stage_newton; ++iter) {
      if (use_deadline && Clock::now() > deadline) {
        out.timed_out = true;
        out.gap = nu / t;
        return out;
      }
      Eigen::VectorXd grad = -t * c;
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(r, r);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const int dim = blocks[b].dim;
        const Eigen::MatrixXd s_inv =
            llts[b].solve(Eigen::MatrixXd::Identity(dim, dim));
        for (int j = 0; j < r; ++j) {
          const Eigen::MatrixXd& bj = blocks[b].basis[j];
          grad(j) -= s_inv.cwiseProduct(bj).sum();
          const Eigen::MatrixXd w = s_inv * bj * s_inv;
          for (int k = 0; k <= j; ++k) {
            const double v = w.cwiseProduct(blocks[b].basis[k]).sum();
            hess(j, k) += v;
            if (k != j) hess(k, j) += v;
          }
        }
      }

      Eigen::VectorXd dz;
      {
        Eigen::LLT<Eigen::MatrixXd> hltt(hess);
        if (hltt.info() == Eigen::Success) {
          dz = hltt.solve(-grad);
        } else {
          const double ridge =
              1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
          Eigen::MatrixXd reg = hess;
          reg.diagonal().array() += ridge;
          dz = reg.llt().solve(-grad);
        }
      }
      if (!dz.allFinite()) {
        out.note = "newton step not finite";
        break;
      }
      const double decrement2 = -grad.dot(dz);
      if (decrement2 / 2.0 <= settings.newton_tol) {
        centered = true;
        break;
      }

      double alpha = 1.0;
      bool accepted = false;
      std::vector<Eigen::LLT<Eigen::MatrixXd>> trial_llts(blocks.size());
      std::vector<double> trial_logdets(blocks.size());
      for (int half = 0; half < 60; ++half) {
        const Eigen::VectorXd trial = z + alpha * dz;
        bool feasible = true;
        for (std::size_t b = 0; b < blocks.size() && feasible; ++b) {
          feasible = cholesky_logdet(blocks[b].at(trial), trial_llts[b],
                                     trial_logdets[b]);
        }
        if (feasible) {
          const double trial_obj = c.dot(trial);
          const double trial_phi = phi(trial_obj, trial_logdets);
          if (trial_phi <= phi_cur + 0.25 * alpha * grad.dot(dz)) {
            z = trial;
            obj_dot = trial_obj;
            phi_cur = trial_phi;
            llts.swap(trial_llts);
            logdets.swap(trial_logdets);
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        out.note = "line search stalled";
        break;
      }
      ++out.newton_iterations;
      out.z = z;
      if (early_stop && early_stop(z)) {
        out.early_stopped = true;
        out.gap = nu / t;
        return out;
      }
      if (z.lpNorm<Eigen::Infinity>() > 1e12) {
        out.note = "iterates diverged";
        out.gap = nu / t;
        return out;
      }
    }

    out.z = z;
    out.gap = nu / t;
    if (std::getenv("GRIDCERT_SDP_TRACE")) {
      std::fprintf(stderr,
                   "[sdp] stage t=%.3e obj=%.8f z_last=%.6f gap=%.3e "
                   "centered=%d iters=%d note='%s'\n",
                   t, c.dot(z), z(r - 1), out.gap, centered,
                   out.newton_iterations, out.note.c_str());
    }
    if (out.gap <= settings.gap_tol && centered) {
      out.converged = true;
      return out;
    }
    if (!centered && !out.note.empty()) return out;
    if (t >= settings.max_barrier) {
      out.note = "barrier ceiling reached";
      return out;
    }
    t = std::min(t * settings.barrier_growth, settings.max_barrier);
  }
  out.note = "stage limit reached";
  return out;
}

}  // namespace

SdpResult solve_sdp(const SdpProblem& problem, const SdpSettings& settings) {
  SdpResult result;
  const int n = problem.num_vars;
  const Clock::time_point deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(
                             settings.time_limit_s > 0 ? settings.time_limit_s
                                                       : 0.0));
  const bool use_deadline = settings.time_limit_s > 0;

  Eigen::VectorXd objective = Eigen::VectorXd::Zero(n);
  if (problem.objective.size() == n) objective = problem.objective;

  // Eliminate the equalities: y = y_p + N z with N an orthonormal nullspace
  // basis. The equality sets we build are highly redundant, so rank decisions
  // go through an SVD.
  Eigen::VectorXd y_particular = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd null_basis = Eigen::MatrixXd::Identity(n, n);
  if (problem.eq_a.rows() > 0) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        problem.eq_a, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > cut) ++rank;
    }
    Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
    for (int i = 0; i < rank; ++i) inv_sv(i) = 1.0 / sv(i);
    y_particular = svd.matrixV().leftCols(sv.size()) * inv_sv.asDiagonal() *
                   svd.matrixU().transpose() * problem.eq_b;
    const double consistency =
        (problem.eq_a * y_particular - problem.eq_b).lpNorm<Eigen::Infinity>();
    if (consistency > 1e-8 * (1.0 + problem.eq_b.lpNorm<Eigen::Infinity>())) {
      result.status = SdpStatus::infeasible;
      result.message = "inconsistent equality constraints";
      result.y = y_particular;
      return result;
    }
    null_basis = svd.matrixV().rightCols(n - rank);
  }
  const int reduced = static_cast<int>(null_basis.cols());

  // Reduced blocks with dense per-variable coefficients.
  std::vector<RBlock> rblocks;
  rblocks.reserve(problem.blocks.size());
  for (const AffineBlock& block : problem.blocks) {
    RBlock rb;
    rb.dim = block.dim;
    rb.constant = block.eval(y_particular);
    rb.basis.assign(static_cast<std::size_t>(reduced),
                    Eigen::MatrixXd::Zero(block.dim, block.dim));
    for (const AffineBlock::Term& term : block.terms) {
      for (int j = 0; j < reduced; ++j) {
        const double w = null_basis(term.var, j);
        if (w == 0.0) continue;
        Eigen::MatrixXd& target = rb.basis[static_cast<std::size_t>(j)];
        for (const AffineBlock::Entry& e : term.entries) {
          target(e.row, e.col) += w * e.value;
          if (e.row != e.col) target(e.col, e.row) += w * e.value;
        }
      }
    }
    rblocks.push_back(std::move(rb));
  }

  const Eigen::VectorXd reduced_objective = null_basis.transpose() * objective;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(reduced);
  if (problem.start.size() == n) {
    z = null_basis.transpose() * (problem.start - y_particular);
  }

  // Strict feasibility of the start; otherwise run phase I with one shared
  // slack on every block.
  double start_min_eig = std::numeric_limits<double>::infinity();
  for (const RBlock& rb : rblocks) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        rb.at(z), Eigen::EigenvaluesOnly);
    start_min_eig = std::min(start_min_eig, eig.eigenvalues().minCoeff());
  }
  int total_newton = 0;
  std::string phase_note = "phase I skipped";
  if (!(start_min_eig > 0.0)) {
    std::vector<RBlock> ext_blocks = rblocks;
    for (RBlock& rb : ext_blocks) {
      rb.basis.push_back(Eigen::MatrixXd::Identity(rb.dim, rb.dim));
    }
    Eigen::VectorXd ext_c = Eigen::VectorXd::Zero(reduced + 1);
    ext_c(reduced) = -1.0;
    Eigen::VectorXd ext_z(reduced + 1);
    ext_z.head(reduced) = z;
    ext_z(reduced) = std::max(0.0, -start_min_eig) + 1.0;

    SdpSettings phase1 = settings;
    phase1.gap_tol = std::max(settings.gap_tol, settings.phase1_margin / 10.0);
    const BarrierOutcome p1 = barrier_solve(
        ext_blocks, ext_c, ext_z, phase1, deadline, use_deadline,
        [&](const Eigen::VectorXd& point) {
          return point(reduced) < -settings.phase1_margin;
        });
    total_newton += p1.newton_iterations;
    if (p1.timed_out) {
      result.status = SdpStatus::timeout;
      result.message = "timeout during phase I";
      result.y = y_particular + null_basis * p1.z.head(reduced);
      return result;
    }
    if (!p1.early_stopped) {
      result.status = SdpStatus::infeasible;
      result.message =
          "phase I optimum slack " + std::to_string(p1.z(reduced)) +
          " did not clear the strict-feasibility margin" +
          (p1.note.empty() ? "" : " (" + p1.note + ")");
      result.y = y_particular + null_basis * p1.z.head(reduced);
      result.newton_iterations = total_newton;
      return result;
    }
    z = p1.z.head(reduced);
    phase_note = "phase I found an interior point";
  }

  const BarrierOutcome main = barrier_solve(rblocks, reduced_objective, z,
                                            settings, deadline, use_deadline,
                                            nullptr);
  total_newton += main.newton_iterations;

  result.y = y_particular + null_basis * main.z;
  result.objective = objective.dot(result.y);
  result.gap = main.gap;
  result.newton_iterations = total_newton;
  if (problem.eq_a.rows() > 0) {
    result.eq_residual =
        (problem.eq_a * result.y - problem.eq_b).lpNorm<Eigen::Infinity>();
  }
  double min_eig = std::numeric_limits<double>::infinity();
  for (const AffineBlock& block : problem.blocks) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        block.eval(result.y), Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  result.min_block_eig = problem.blocks.empty() ? 0.0 : min_eig;

  if (main.timed_out) {
    result.status = SdpStatus::timeout;
    result.message = phase_note + "; timeout during path following";
  } else if (main.converged) {
    result.status = SdpStatus::optimal;
    result.message = phase_note + "; path following converged";
  } else {
    result.status = SdpStatus::inaccurate;
    result.message = phase_note + "; " +
                     (main.note.empty() ? "accuracy target missed" : main.note);
  }
  return result;
}

}  // namespace gridcert
