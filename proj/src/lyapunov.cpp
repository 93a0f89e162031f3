#include "gridcert/lyapunov.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "json.hpp"

namespace gridcert {
namespace {

// Variable layout for the family SDP: packed upper triangle of Q, then K,
// then H, then the decay margin.
struct Layout {
  int n = 0;
  int m = 0;
  int n2 = 0;
  int nq = 0;
  int k_off = 0;
  int h_off = 0;
  int t_idx = 0;
  int num_vars = 0;

  explicit Layout(const StateSpaceModel& sys)
      : n(sys.n),
        m(sys.m),
        n2(2 * sys.n),
        nq(sys.n * (2 * sys.n + 1)),
        k_off(nq),
        h_off(nq + sys.m),
        t_idx(nq + 2 * sys.m),
        num_vars(nq + 2 * sys.m + 1) {}

  [[nodiscard]] int q(int i, int j) const {
    if (i > j) std::swap(i, j);
    return i * n2 - i * (i - 1) / 2 + (j - i);
  }

  [[nodiscard]] Eigen::MatrixXd unpack_q(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd out(n2, n2);
    for (int i = 0; i < n2; ++i) {
      for (int j = i; j < n2; ++j) {
        out(i, j) = out(j, i) = y(q(i, j));
      }
    }
    return out;
  }

  [[nodiscard]] Eigen::VectorXd pack(const Eigen::MatrixXd& qm,
                                     const Eigen::VectorXd& k,
                                     const Eigen::VectorXd& h,
                                     double t) const {
    Eigen::VectorXd y(num_vars);
    for (int i = 0; i < n2; ++i) {
      for (int j = i; j < n2; ++j) y(q(i, j)) = qm(i, j);
    }
    y.segment(k_off, m) = k;
    y.segment(h_off, m) = h;
    y(t_idx) = t;
    return y;
  }
};

// S22 + margin certificate block in the structurally nonzero coordinates:
//   [[-S22 - tI, -R2], [-R2', 2H - tI]] >= 0.
Eigen::MatrixXd reduced_block(const StateSpaceModel& sys,
                              const Eigen::MatrixXd& qm,
                              const Eigen::VectorXd& k,
                              const Eigen::VectorXd& h, double t) {
  const int n = sys.n;
  const int m = sys.m;
  const Eigen::MatrixXd q12 = qm.topRightCorner(n, n);
  const Eigen::MatrixXd q22 = qm.bottomRightCorner(n, n);
  const Eigen::VectorXd g = sys.damping.cwiseQuotient(sys.inertia);
  const Eigen::MatrixXd s22 = q12 + q12.transpose() - g.asDiagonal() * q22 -
                              q22 * g.asDiagonal();
  const Eigen::MatrixXd r2 =
      q22 * sys.inertia.cwiseInverse().asDiagonal() *
          sys.incidence.transpose() * sys.edge_weight.asDiagonal() -
      sys.incidence.transpose() * k.asDiagonal();
  Eigen::MatrixXd block(n + m, n + m);
  block.topLeftCorner(n, n) = -s22;
  block.topRightCorner(n, m) = -r2;
  block.bottomLeftCorner(m, n) = -r2.transpose();
  block.bottomRightCorner(m, m) = Eigen::MatrixXd((2.0 * h).asDiagonal());
  block.diagonal().array() -= t;
  return block;
}

// Strictly feasible family member built from the machine parameters.
Eigen::VectorXd analytic_start(const StateSpaceModel& sys, const Layout& lay,
                               double trace_target, double t0) {
  const double alpha =
      0.5 * sys.damping.cwiseQuotient(sys.inertia).minCoeff();
  Eigen::MatrixXd qm = Eigen::MatrixXd::Zero(lay.n2, lay.n2);
  qm.topLeftCorner(lay.n, lay.n) =
      Eigen::MatrixXd((alpha * sys.damping).asDiagonal());
  qm.topRightCorner(lay.n, lay.n) =
      Eigen::MatrixXd((alpha * sys.inertia).asDiagonal());
  qm.bottomLeftCorner(lay.n, lay.n) = qm.topRightCorner(lay.n, lay.n);
  qm.bottomRightCorner(lay.n, lay.n) =
      Eigen::MatrixXd(sys.inertia.asDiagonal());
  const double scale = trace_target / qm.trace();
  qm *= scale;
  const Eigen::VectorXd k = scale * sys.edge_weight;
  const Eigen::VectorXd h = scale * alpha * sys.edge_weight;
  return lay.pack(qm, k, h, t0);
}

struct BuildMode {
  bool randomized = false;
  std::uint64_t seed = 0;
  const std::vector<CertificateConstraint>* directions = nullptr;
  const CertificateConstraint* penalty = nullptr;
};

SdpProblem build_family_sdp(const LmiProblem& problem, const BuildMode& mode) {
  const StateSpaceModel& sys = problem.sys;
  const Layout lay(sys);
  const int n = sys.n;
  const int m = sys.m;
  const double mu = problem.mu;
  const double kappa =
      problem.kappa_min > 0 ? problem.kappa_min
                            : 1e-4 * sys.edge_weight.maxCoeff();
  const double trace_target =
      problem.trace_target > 0 ? problem.trace_target : 2.0 * n;
  const bool directed = mode.directions != nullptr && !mode.directions->empty();

  SdpProblem sdp;
  // Directed solves maximize the smallest of several linear functionals and
  // carry one extra epigraph variable after the certificate coordinates.
  sdp.num_vars = lay.num_vars + (directed ? 1 : 0);
  const int s_idx = lay.num_vars;

  sdp.blocks.push_back(block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
    return reduced_block(sys, lay.unpack_q(y), y.segment(lay.k_off, m),
                         y.segment(lay.h_off, m), y(lay.t_idx));
  }));
  sdp.blocks.push_back(block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f = lay.unpack_q(y);
    f.diagonal().array() -= mu;
    return f;
  }));
  sdp.blocks.push_back(block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m, m);
    f.diagonal() = (y.segment(lay.k_off, m).array() - kappa).matrix();
    return f;
  }));
  sdp.blocks.push_back(block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m, m);
    f.diagonal() = y.segment(lay.h_off, m);
    return f;
  }));
  for (const CertificateConstraint& extra : problem.extras) {
    sdp.blocks.push_back(
        block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
          const Eigen::MatrixXd qm = lay.unpack_q(y);
          double lhs = qm.cwiseProduct(extra.q_coeff).sum() +
                       extra.k_coeff.dot(y.segment(lay.k_off, m));
          Eigen::MatrixXd f(1, 1);
          f(0, 0) = extra.bound - lhs;
          return f;
        }));
  }

  // Structural equalities: the (1,1) block of A'Q + QA vanishes identically,
  // so negative semidefiniteness of the full matrix forces these exactly.
  const int rows = n * n + n * m + 1;
  sdp.eq_a = Eigen::MatrixXd::Zero(rows, sdp.num_vars);
  sdp.eq_b = Eigen::VectorXd::Zero(rows);
  int row = 0;
  const Eigen::VectorXd g = sys.damping.cwiseQuotient(sys.inertia);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      sdp.eq_a(row, lay.q(i, j)) += 1.0;
      sdp.eq_a(row, lay.q(i, n + j)) -= g(j);
      ++row;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < m; ++e) {
      for (int j = 0; j < n; ++j) {
        const double coeff =
            sys.incidence(e, j) * sys.edge_weight(e) / sys.inertia(j);
        if (coeff != 0.0) sdp.eq_a(row, lay.q(i, n + j)) += coeff;
      }
      if (sys.incidence(e, i) != 0.0)
        sdp.eq_a(row, lay.h_off + e) -= sys.incidence(e, i);
      ++row;
    }
  }
  for (int i = 0; i < lay.n2; ++i) sdp.eq_a(row, lay.q(i, i)) = 1.0;
  sdp.eq_b(row) = trace_target;

  sdp.objective = Eigen::VectorXd::Zero(sdp.num_vars);
  if (!mode.randomized && !directed) {
    sdp.objective(lay.t_idx) = 1.0;
    sdp.start = analytic_start(sys, lay, trace_target, 0.0);
    // The margin is otherwise free to run to -infinity, which leaves the
    // feasibility (phase I) subproblem unbounded; members below margin -1
    // certify nothing, so the floor costs nothing.
    sdp.blocks.push_back(
        block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
          Eigen::MatrixXd f(1, 1);
          f(0, 0) = y(lay.t_idx) + 1.0;
          return f;
        }));
  } else {
    if (directed) {
      // Maximize the smallest of the direction functionals (minus the
      // penalty one when present): push the epigraph variable s with every
      // functional bounding it from above. q_coeff is symmetric, so each
      // packed off-diagonal entry of Q picks up both (i, j) and (j, i).
      sdp.objective(s_idx) = 1.0;
      if (mode.penalty != nullptr) {
        const Eigen::MatrixXd& pq = mode.penalty->q_coeff;
        for (int i = 0; i < lay.n2; ++i) {
          for (int j = i; j < lay.n2; ++j) {
            sdp.objective(lay.q(i, j)) -= (i == j ? 1.0 : 2.0) * pq(i, j);
          }
        }
        sdp.objective.segment(lay.k_off, m) -= mode.penalty->k_coeff;
      }
      for (const CertificateConstraint& d : *mode.directions) {
        sdp.blocks.push_back(
            block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
              const Eigen::MatrixXd qm = lay.unpack_q(y);
              const double value =
                  qm.cwiseProduct(d.q_coeff).sum() +
                  d.k_coeff.dot(y.segment(lay.k_off, m));
              Eigen::MatrixXd f(1, 1);
              f(0, 0) = value - y(s_idx);
              return f;
            }));
      }
      // Same role as the margin floor: without it the barrier rewards
      // s -> -infinity and phase I becomes unbounded.
      sdp.blocks.push_back(
          block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
            Eigen::MatrixXd f(1, 1);
            f(0, 0) = y(s_idx) + 1.0;
            return f;
          }));
    } else {
      // Bounded random objective over (Q, K) used to exercise the family
      // away from the margin optimum.
      std::mt19937_64 rng(mode.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int i = 0; i < lay.nq + m; ++i) sdp.objective(i) = gauss(rng);
      const double norm = sdp.objective.norm();
      if (norm > 0) sdp.objective /= norm;
      sdp.objective(lay.t_idx) = 1.0;
    }
    // Box bounds keep the feasible set compact and the margin floor keeps
    // every output a usable decay certificate.

    const double box = 100.0 * (1.0 + sys.edge_weight.maxCoeff());
    sdp.blocks.push_back(
        block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
          Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m, m);
          f.diagonal() = (box - y.segment(lay.k_off, m).array()).matrix();
          return f;
        }));
    sdp.blocks.push_back(
        block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
          Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m, m);
          f.diagonal() = (box - y.segment(lay.h_off, m).array()).matrix();
          return f;
        }));
    sdp.blocks.push_back(
        block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
          Eigen::MatrixXd f(1, 1);
          f(0, 0) = y(lay.t_idx) - 1e-6;
          return f;
        }));
    sdp.blocks.push_back(
        block_from_map(sdp.num_vars, [&](const Eigen::VectorXd& y) {
          Eigen::MatrixXd f(1, 1);
          f(0, 0) = 10.0 - y(lay.t_idx);
          return f;
        }));

    const Eigen::VectorXd base = analytic_start(sys, lay, trace_target, 0.0);
    const Eigen::MatrixXd start_red =
        reduced_block(sys, lay.unpack_q(base), base.segment(lay.k_off, m),
                      base.segment(lay.h_off, m), 0.0);
    const double lam_min =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(start_red,
                                                       Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    const double t0 = std::max(2e-6, std::min(1e-3, 0.5 * lam_min));
    sdp.start = Eigen::VectorXd::Zero(sdp.num_vars);
    sdp.start.head(lay.num_vars) = base;
    sdp.start(lay.t_idx) = t0;
    if (directed) {
      const Eigen::MatrixXd qm = lay.unpack_q(base);
      double lowest = std::numeric_limits<double>::infinity();
      for (const CertificateConstraint& d : *mode.directions) {
        lowest = std::min(lowest, qm.cwiseProduct(d.q_coeff).sum() +
                                      d.k_coeff.dot(base.segment(lay.k_off, m)));
      }
      sdp.start(s_idx) = std::max(-0.999, lowest - 1e-3 * (1.0 + std::abs(lowest)));
    }
  }
  return sdp;
}

CandidateResult run_candidate(const LmiProblem& problem, const BuildMode& mode,
                              const SdpSettings& settings) {
  const Layout lay(problem.sys);
  const SdpProblem sdp = build_family_sdp(problem, mode);
  CandidateResult out;
  out.solver = solve_sdp(sdp, settings);
  if (out.solver.status == SdpStatus::timeout) {
    out.status = CandidateStatus::timeout;
    return out;
  }
  if (out.solver.status == SdpStatus::infeasible) {
    out.status = CandidateStatus::infeasible;
    return out;
  }
  // Inaccurate solves can still carry a valid certificate; accept on actual
  // block feasibility, not on solver status.
  if (out.solver.min_block_eig < -1e-8) {
    out.status = CandidateStatus::infeasible;
    return out;
  }
  // A non-positive maximized margin means no member of the family decays
  // under the requested constraints; such output is not a certificate.
  if (out.solver.y(lay.t_idx) <= 0.0) {
    out.status = CandidateStatus::infeasible;
    out.solver.message = "maximum decay margin is not positive (" +
                         std::to_string(out.solver.y(lay.t_idx)) + ")";
    return out;
  }
  out.status = CandidateStatus::found;
  const Eigen::VectorXd& y = out.solver.y;
  out.cert.q = lay.unpack_q(y);
  out.cert.k = y.segment(lay.k_off, lay.m);
  out.cert.h = y.segment(lay.h_off, lay.m);
  out.cert.margin = y(lay.t_idx);
  out.cert.mu = problem.mu;
  out.cert.kappa_min = problem.kappa_min > 0
                           ? problem.kappa_min
                           : 1e-4 * problem.sys.edge_weight.maxCoeff();
  out.cert.source = "solver";
  return out;
}

}  // namespace

LmiProblem assemble_lmi(const StateSpaceModel& sys, double mu) {
  LmiProblem problem;
  problem.sys = sys;
  problem.mu = mu;
  problem.kappa_min = 1e-4 * sys.edge_weight.maxCoeff();
  problem.trace_target = 2.0 * sys.n;
  return problem;
}

Eigen::MatrixXd lmi_block(const StateSpaceModel& sys, const Eigen::MatrixXd& q,
                          const Eigen::VectorXd& k, const Eigen::VectorXd& h) {
  const int n2 = 2 * sys.n;
  const int m = sys.m;
  const Eigen::MatrixXd s = sys.a_mat.transpose() * q + q * sys.a_mat;
  const Eigen::MatrixXd r =
      q * sys.b_mat - sys.c_mat.transpose() * h.asDiagonal() -
      (k.asDiagonal() * sys.c_mat * sys.a_mat).transpose();
  Eigen::MatrixXd block(n2 + m, n2 + m);
  block.topLeftCorner(n2, n2) = s;
  block.topRightCorner(n2, m) = r;
  block.bottomLeftCorner(m, n2) = r.transpose();
  block.bottomRightCorner(m, m) = Eigen::MatrixXd((-2.0 * h).asDiagonal());
  return block;
}

Eigen::MatrixXd lmi_block(const StateSpaceModel& sys, const Certificate& cert) {
  return lmi_block(sys, cert.q, cert.k, cert.h);
}

CandidateResult find_candidate(const LmiProblem& problem,
                               const SdpSettings& settings) {
  return run_candidate(problem, {false, 0}, settings);
}

CandidateResult find_candidate_randomized(const LmiProblem& problem,
                                          std::uint64_t seed,
                                          const SdpSettings& settings) {
  return run_candidate(problem, {true, seed}, settings);
}

CandidateResult find_candidate_directed(
    const LmiProblem& problem,
    const std::vector<CertificateConstraint>& directions,
    const CertificateConstraint* penalty, const SdpSettings& settings) {
  if (directions.empty()) {
    throw ModelError("directed candidate search needs at least one direction");
  }
  auto check = [&](const CertificateConstraint& d) {
    if (d.q_coeff.rows() != 2 * problem.sys.n ||
        d.q_coeff.cols() != 2 * problem.sys.n ||
        d.k_coeff.size() != problem.sys.m) {
      throw ModelError("direction coefficients do not match the network");
    }
  };
  for (const CertificateConstraint& d : directions) check(d);
  if (penalty != nullptr) check(*penalty);
  BuildMode mode;
  mode.directions = &directions;
  mode.penalty = penalty;
  return run_candidate(problem, mode, settings);
}

Certificate energy_member(const StateSpaceModel& sys) {
  Certificate cert;
  cert.q = Eigen::MatrixXd::Zero(2 * sys.n, 2 * sys.n);
  cert.q.bottomRightCorner(sys.n, sys.n) =
      Eigen::MatrixXd(sys.inertia.asDiagonal());
  cert.k = sys.edge_weight;
  cert.h = Eigen::VectorXd::Zero(sys.m);
  cert.margin = 0.0;
  cert.mu = 0.0;
  cert.kappa_min = 0.0;
  cert.source = "energy";
  return cert;
}

double edge_potential(const StateSpaceModel& sys, int edge, double delta) {
  const double ds = sys.eq_delta(edge);
  return std::cos(ds) + ds * std::sin(ds) - std::cos(delta) -
         delta * std::sin(ds);
}

double evaluate_v_raw(const StateSpaceModel& sys, const Certificate& cert,
                      const Eigen::VectorXd& x) {
  const Eigen::VectorXd angles = sys.edge_angles(x);
  double acc = 0.5 * x.dot(cert.q * x);
  for (int e = 0; e < sys.m; ++e) {
    acc -= cert.k(e) * (std::cos(angles(e)) +
                        angles(e) * std::sin(sys.eq_delta(e)));
  }
  return acc;
}

double evaluate_v(const StateSpaceModel& sys, const Certificate& cert,
                  const Eigen::VectorXd& x) {
  const Eigen::VectorXd angles = sys.edge_angles(x);
  double acc = 0.5 * x.dot(cert.q * x);
  for (int e = 0; e < sys.m; ++e) {
    acc += cert.k(e) * edge_potential(sys, e, angles(e));
  }
  return acc;
}

Eigen::VectorXd evaluate_v_gradient(const StateSpaceModel& sys,
                                    const Certificate& cert,
                                    const Eigen::VectorXd& x) {
  const Eigen::VectorXd weighted =
      cert.k.cwiseProduct(sys.nonlinearity(x));
  return cert.q * x + sys.c_mat.transpose() * weighted;
}

double evaluate_vdot(const StateSpaceModel& sys, const Certificate& cert,
                     const Eigen::VectorXd& x) {
  return evaluate_v_gradient(sys, cert, x).dot(sys.rhs(x));
}

std::string serialize_certificate(const Certificate& cert) {
  nlohmann::json doc;
  doc["q"] = nlohmann::json::array();
  for (int i = 0; i < cert.q.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < cert.q.cols(); ++j) row.push_back(cert.q(i, j));
    doc["q"].push_back(row);
  }
  doc["k"] = std::vector<double>(cert.k.data(), cert.k.data() + cert.k.size());
  doc["h"] = std::vector<double>(cert.h.data(), cert.h.data() + cert.h.size());
  doc["margin"] = cert.margin;
  doc["mu"] = cert.mu;
  doc["kappa_min"] = cert.kappa_min;
  doc["source"] = cert.source;
  return doc.dump(2) + "\n";
}

Certificate parse_certificate(const std::string& json_text) {
  Certificate cert;
  try {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    const auto& q = doc.at("q");
    const int n2 = static_cast<int>(q.size());
    cert.q.resize(n2, n2);
    for (int i = 0; i < n2; ++i) {
      if (static_cast<int>(q.at(i).size()) != n2)
        throw ModelError("certificate q matrix is not square");
      for (int j = 0; j < n2; ++j) cert.q(i, j) = q.at(i).at(j).get<double>();
    }
    const std::vector<double> k = doc.at("k").get<std::vector<double>>();
    const std::vector<double> h = doc.at("h").get<std::vector<double>>();
    if (k.size() != h.size())
      throw ModelError("certificate k and h lengths differ");
    cert.k = Eigen::Map<const Eigen::VectorXd>(k.data(),
                                               static_cast<long>(k.size()));
    cert.h = Eigen::Map<const Eigen::VectorXd>(h.data(),
                                               static_cast<long>(h.size()));
    cert.margin = doc.at("margin").get<double>();
    cert.mu = doc.value("mu", 0.0);
    cert.kappa_min = doc.value("kappa_min", 0.0);
    cert.source = "file";  // provenance of the in-memory object, not the writer
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("bad certificate json: ") + e.what());
  }
  return cert;
}

}  // namespace gridcert
