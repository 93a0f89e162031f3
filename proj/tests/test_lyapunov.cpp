#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gridcert/equilibrium.hpp"
#include "gridcert/lyapunov.hpp"
#include "gridcert/model.hpp"
#include "gridcert/state_space.hpp"

using namespace gridcert;

namespace {

StateSpaceModel make_sys(BuiltinCase which) {
  const PowerNetwork net = builtin_case(which);
  const Equilibrium eq = solve_equilibrium(net);
  REQUIRE(eq.converged);
  return build_state_space(net, eq);
}

Eigen::VectorXd random_polytope_state(const StateSpaceModel& sys,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Eigen::VectorXd x(2 * sys.n);
    for (int i = 0; i < 2 * sys.n; ++i) x(i) = 1.5 * u(rng);
    if (sys.in_polytope(x)) return x;
  }
}

}  // namespace

TEST_CASE("two-machine margin maximization has a known closed-form optimum") {
  const StateSpaceModel sys = make_sys(BuiltinCase::two_bus);
  const LmiProblem prob = assemble_lmi(sys);
  const CandidateResult r = find_candidate(prob);
  REQUIRE(r.status == CandidateStatus::found);

  // Hand-derived unique optimum under trace(Q) = 2n:
  //   Q = (1/7) [[5, 5], [5, 9]], K = 36/35, H = 4/7, margin 8/7.
  CHECK(r.cert.margin == doctest::Approx(8.0 / 7.0).epsilon(1e-6));
  CHECK(r.cert.q(0, 0) == doctest::Approx(5.0 / 7.0).epsilon(1e-5));
  CHECK(r.cert.q(0, 1) == doctest::Approx(5.0 / 7.0).epsilon(1e-5));
  CHECK(r.cert.q(1, 1) == doctest::Approx(9.0 / 7.0).epsilon(1e-5));
  CHECK(r.cert.q(1, 0) == doctest::Approx(r.cert.q(0, 1)));
  CHECK(r.cert.k(0) == doctest::Approx(36.0 / 35.0).epsilon(1e-5));
  CHECK(r.cert.h(0) == doctest::Approx(4.0 / 7.0).epsilon(1e-5));
  CHECK(r.cert.q.trace() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.cert.source == "solver");

  // The full decay block is negative semidefinite at the optimum.
  const Eigen::MatrixXd blk = lmi_block(sys, r.cert);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk);
  CHECK(es.eigenvalues().maxCoeff() < 1e-8);
}

TEST_CASE("three-machine candidate is found with a positive margin") {
  const StateSpaceModel sys = make_sys(BuiltinCase::nine_bus);
  const CandidateResult r = find_candidate(assemble_lmi(sys));
  REQUIRE(r.status == CandidateStatus::found);
  CHECK(r.cert.margin == doctest::Approx(0.65953).epsilon(1e-4));
  CHECK(r.cert.q.trace() == doctest::Approx(6.0).epsilon(1e-9));
  const Eigen::MatrixXd blk = lmi_block(sys, r.cert);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(blk)
            .eigenvalues()
            .maxCoeff() < 1e-8);
  // Q stays positive definite and K above its floor.
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.cert.q)
            .eigenvalues()
            .minCoeff() > 0.0);
  CHECK(r.cert.k.minCoeff() >= r.cert.kappa_min - 1e-9);
  CHECK(r.cert.h.minCoeff() >= -1e-9);
}

TEST_CASE("certified functions decay along the flow inside the polytope") {
  for (BuiltinCase which : {BuiltinCase::two_bus, BuiltinCase::nine_bus}) {
    const StateSpaceModel sys = make_sys(which);
    const CandidateResult r = find_candidate(assemble_lmi(sys));
    REQUIRE(r.status == CandidateStatus::found);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
      const Eigen::VectorXd x = random_polytope_state(sys, rng);
      CHECK(evaluate_vdot(sys, r.cert, x) <= 1e-10);
    }
    // Strict decay away from the synchronous manifold.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * sys.n);
    x(2 * sys.n - 1) = 0.5;
    CHECK(evaluate_vdot(sys, r.cert, x) < -1e-4);
  }
}

TEST_CASE("value, gradient and time derivative are mutually consistent") {
  const StateSpaceModel sys = make_sys(BuiltinCase::nine_bus);
  const CandidateResult r = find_candidate(assemble_lmi(sys));
  REQUIRE(r.status == CandidateStatus::found);
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd x = random_polytope_state(sys, rng);

    // Gradient vs central differences of the value.
    const Eigen::VectorXd g = evaluate_v_gradient(sys, r.cert, x);
    for (int i = 0; i < x.size(); i += 2) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double fd =
          (evaluate_v(sys, r.cert, xp) - evaluate_v(sys, r.cert, xm)) / (2 * h);
      CHECK(g(i) == doctest::Approx(fd).epsilon(1e-5));
    }

    // V-dot vs the chain rule along the vector field.
    const double direct = evaluate_vdot(sys, r.cert, x);
    CHECK(direct == doctest::Approx(g.dot(sys.rhs(x))).epsilon(1e-12));

    // Shifted value equals raw value minus the raw value at the origin.
    const double shift = evaluate_v_raw(sys, r.cert, Eigen::VectorXd::Zero(x.size()));
    CHECK(evaluate_v(sys, r.cert, x) ==
          doctest::Approx(evaluate_v_raw(sys, r.cert, x) - shift).epsilon(1e-9));
  }
  // The shifted value vanishes at the equilibrium and is positive nearby.
  CHECK(evaluate_v(sys, r.cert, Eigen::VectorXd::Zero(2 * sys.n)) ==
        doctest::Approx(0.0));
  std::mt19937_64 rng2(5);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x = random_polytope_state(sys, rng2);
    if (x.norm() < 1e-3) continue;
    CHECK(evaluate_v(sys, r.cert, x) > 0.0);
  }
}

TEST_CASE("the energy member dissipates exactly through the dampers") {
  for (BuiltinCase which : {BuiltinCase::two_bus, BuiltinCase::nine_bus}) {
    const PowerNetwork net = builtin_case(which);
    const Equilibrium eq = solve_equilibrium(net);
    const StateSpaceModel sys = build_state_space(net, eq);
    const Certificate em = energy_member(sys);
    CHECK(em.source == "energy");

    // Its decay block is still (weakly) negative semidefinite.
    const Eigen::MatrixXd blk = lmi_block(sys, em);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(blk)
              .eigenvalues()
              .maxCoeff() < 1e-12);

    // And its dissipation is -sum_k d_k * speed_k^2, for every state.
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Eigen::VectorXd damping(sys.n);
    int si = 0;
    for (const auto& g : net.generators)
      if (!net.infinite_bus || g.id != *net.infinite_bus) damping(si++) = g.damping_d;
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd x(2 * sys.n);
      for (int i = 0; i < 2 * sys.n; ++i) x(i) = u(rng);
      const Eigen::VectorXd speeds = x.tail(sys.n);
      const double expected = -damping.cwiseProduct(speeds.cwiseAbs2()).sum();
      CHECK(evaluate_vdot(sys, em, x) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("randomized members are valid and deterministic per seed") {
  const StateSpaceModel sys = make_sys(BuiltinCase::nine_bus);
  const LmiProblem prob = assemble_lmi(sys);

  const CandidateResult a = find_candidate_randomized(prob, 123);
  const CandidateResult b = find_candidate_randomized(prob, 123);
  const CandidateResult c = find_candidate_randomized(prob, 124);
  REQUIRE(a.status == CandidateStatus::found);
  REQUIRE(c.status == CandidateStatus::found);
  CHECK(serialize_certificate(a.cert) == serialize_certificate(b.cert));
  CHECK(serialize_certificate(a.cert) != serialize_certificate(c.cert));

  for (const Certificate& cert : {a.cert, c.cert}) {
    CHECK(cert.q.trace() == doctest::Approx(6.0).epsilon(1e-8));
    CHECK(cert.k.minCoeff() >= cert.kappa_min - 1e-9);
    CHECK(cert.h.minCoeff() >= -1e-9);
    const Eigen::MatrixXd blk = lmi_block(sys, cert);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(blk)
              .eigenvalues()
              .maxCoeff() < 1e-8);
  }
  // Distinct objectives explore genuinely different members.
  CHECK((a.cert.k - c.cert.k).norm() > 1e-4);
}

TEST_CASE("level constraints carve the feasible family") {
  // Capping V-bar at a chosen state forces the returned member below the cap.
  const StateSpaceModel sys = make_sys(BuiltinCase::two_bus);
  Eigen::VectorXd x0(2);
  x0 << 0.8, 0.3;

  const CandidateResult unconstrained = find_candidate(assemble_lmi(sys));
  REQUIRE(unconstrained.status == CandidateStatus::found);
  const double v_free = evaluate_v(sys, unconstrained.cert, x0);

  LmiProblem capped = assemble_lmi(sys);
  CertificateConstraint con;
  con.q_coeff = 0.5 * x0 * x0.transpose();
  con.k_coeff = Eigen::VectorXd(1);
  con.k_coeff(0) = edge_potential(sys, 0, sys.edge_angles(x0)(0));
  con.bound = 0.5 * v_free;
  capped.extras.push_back(con);

  const CandidateResult r = find_candidate(capped);
  REQUIRE(r.status == CandidateStatus::found);
  CHECK(evaluate_v(sys, r.cert, x0) <= con.bound + 1e-6);
  CHECK(r.cert.margin > 0.0);
  CHECK(r.cert.margin <= unconstrained.cert.margin + 1e-9);

  // An impossible cap (V-bar <= 0 at a genuinely displaced state with
  // Q >= mu I and K >= kappa) must come back infeasible.
  LmiProblem impossible = assemble_lmi(sys);
  con.bound = 0.0;
  impossible.extras.push_back(con);
  const CandidateResult bad = find_candidate(impossible);
  CHECK(bad.status == CandidateStatus::infeasible);
}

TEST_CASE("certificates round-trip through JSON") {
  const StateSpaceModel sys = make_sys(BuiltinCase::nine_bus);
  const CandidateResult r = find_candidate(assemble_lmi(sys));
  REQUIRE(r.status == CandidateStatus::found);
  const std::string text = serialize_certificate(r.cert);
  const Certificate back = parse_certificate(text);
  CHECK((back.q - r.cert.q).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  CHECK((back.k - r.cert.k).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  CHECK((back.h - r.cert.h).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  CHECK(back.margin == doctest::Approx(r.cert.margin));
  CHECK(back.source == "file");

  CHECK_THROWS_AS((void)parse_certificate("not json at all"), ModelError);
  CHECK_THROWS_AS((void)parse_certificate("{\"q\": [[1, 2]], \"k\": [], \"h\": []}"),
                  ModelError);
  CHECK_THROWS_AS(
      (void)parse_certificate(
          "{\"q\": [[1, 0], [0, 1]], \"k\": [1.0], \"h\": [1.0, 2.0]}"),
      ModelError);
}

TEST_CASE("a vanishing time budget reports a timeout") {
  const StateSpaceModel sys = make_sys(BuiltinCase::nine_bus);
  SdpSettings rushed;
  rushed.time_limit_s = 1e-9;
  const CandidateResult r = find_candidate(assemble_lmi(sys), rushed);
  CHECK(r.status == CandidateStatus::timeout);
}
