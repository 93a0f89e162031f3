#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "gridcert/equilibrium.hpp"
#include "gridcert/model.hpp"
#include "gridcert/state_space.hpp"

using namespace gridcert;

namespace {

StateSpaceModel make(BuiltinCase which) {
  const PowerNetwork net = builtin_case(which);
  return build_state_space(net, solve_equilibrium(net));
}

// Swing dynamics evaluated directly from the physics, bypassing the matrices.
Eigen::VectorXd direct_rhs(const PowerNetwork& net, const Equilibrium& eq,
                           const Eigen::VectorXd& x) {
  const int n = net.state_size();
  Eigen::VectorXd absolute = eq.angles + x.head(n);
  Eigen::VectorXd accel(n);
  int i = 0;
  for (int id : net.state_ids()) {
    const Generator& g = net.by_id(id);
    double flow = 0;
    for (const Edge& e : net.edges) {
      const int ik = net.state_index(e.k);
      const int ij = net.state_index(e.j);
      const double dk = ik >= 0 ? absolute(ik) : 0.0;
      const double dj = ij >= 0 ? absolute(ij) : 0.0;
      if (e.k == id) flow += net.edge_weight(e) * std::sin(dk - dj);
      if (e.j == id) flow -= net.edge_weight(e) * std::sin(dk - dj);
    }
    accel(i) = (g.power_p - g.damping_d * x(n + i) - flow) / g.inertia_m;
    ++i;
  }
  Eigen::VectorXd out(2 * n);
  out.head(n) = x.tail(n);
  out.tail(n) = accel;
  return out;
}

}  // namespace

TEST_CASE("matrix shapes and the vanishing feedthrough") {
  for (BuiltinCase which : {BuiltinCase::two_bus, BuiltinCase::nine_bus}) {
    const StateSpaceModel sys = make(which);
    CHECK(sys.a_mat.rows() == 2 * sys.n);
    CHECK(sys.b_mat.cols() == sys.m);
    CHECK(sys.c_mat.rows() == sys.m);
    // C B = 0 makes the loop transformation exact.
    CHECK((sys.c_mat * sys.b_mat).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("structured right-hand side equals the raw swing equations") {
  for (BuiltinCase which : {BuiltinCase::two_bus, BuiltinCase::nine_bus}) {
    const PowerNetwork net = builtin_case(which);
    const Equilibrium eq = solve_equilibrium(net);
    const StateSpaceModel sys = build_state_space(net, eq);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd x(2 * sys.n);
      for (int i = 0; i < x.size(); ++i) x(i) = uni(rng);
      const Eigen::VectorXd a = sys.rhs(x);
      const Eigen::VectorXd b = direct_rhs(net, eq, x);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("equilibrium is a fixed point") {
  const StateSpaceModel sys = make(BuiltinCase::nine_bus);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * sys.n);
  CHECK(sys.rhs(zero).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sys.nonlinearity(zero).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("jacobian agrees with finite differences") {
  const StateSpaceModel sys = make(BuiltinCase::nine_bus);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd x(2 * sys.n);
  for (int i = 0; i < x.size(); ++i) x(i) = uni(rng);
  const Eigen::MatrixXd jac = sys.rhs_jacobian(x);
  const double h = 1e-6;
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Eigen::VectorXd col = (sys.rhs(xp) - sys.rhs(xm)) / (2 * h);
    CHECK((col - jac.col(j)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("decay region uses actual angle sums") {
  const StateSpaceModel sys = make(BuiltinCase::two_bus);
  const double ds = std::numbers::pi / 6;
  REQUIRE(sys.eq_delta(0) == doctest::Approx(ds));
  // Deviation at the positive boundary: pi - 2*delta*.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  x(0) = std::numbers::pi - 2 * ds - 1e-9;
  CHECK(sys.in_polytope(x));
  x(0) = std::numbers::pi - 2 * ds + 1e-9;
  CHECK_FALSE(sys.in_polytope(x));
  x(0) = -std::numbers::pi - 2 * ds + 1e-9;
  CHECK(sys.in_polytope(x));
  x(0) = -std::numbers::pi - 2 * ds - 1e-9;
  CHECK_FALSE(sys.in_polytope(x));
}

TEST_CASE("convexity region bounds the actual angle at pi/2") {
  const StateSpaceModel sys = make(BuiltinCase::two_bus);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  x(0) = std::numbers::pi / 2 - sys.eq_delta(0) - 1e-9;
  CHECK(sys.in_convexity_region(x));
  x(0) = std::numbers::pi / 2 - sys.eq_delta(0) + 1e-9;
  CHECK_FALSE(sys.in_convexity_region(x));
}

TEST_CASE("facets cover both signs with the boundary angle") {
  const StateSpaceModel sys = make(BuiltinCase::nine_bus);
  const auto facets = sys.facets();
  REQUIRE(facets.size() == 2 * static_cast<std::size_t>(sys.m));
  for (const Facet& f : facets) {
    CHECK(f.theta ==
          doctest::Approx(f.sign * std::numbers::pi - sys.eq_delta(f.edge)));
    // On the facet the sector inequality degenerates to equality.
    const double ds = sys.eq_delta(f.edge);
    CHECK(std::abs(f.theta + ds) == doctest::Approx(std::numbers::pi));
  }
}

TEST_CASE("sector bound holds exactly inside the decay region") {
  const double ds = 0.4;
  for (double delta = -std::numbers::pi + ds + 1e-6;
       delta < std::numbers::pi - ds; delta += 0.01) {
    CHECK(sector_bound_holds(delta, ds));
  }
  // And fails beyond it.
  CHECK_FALSE(sector_bound_holds(std::numbers::pi - ds + 0.3, ds));
}

TEST_CASE("polytope slack is signed and vanishes on the boundary") {
  const StateSpaceModel sys = make(BuiltinCase::two_bus);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  CHECK(sys.polytope_slack(x) ==
        doctest::Approx(std::numbers::pi - 2 * sys.eq_delta(0)));
  x(0) = std::numbers::pi - 2 * sys.eq_delta(0);
  CHECK(sys.polytope_slack(x) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("building from an unconverged equilibrium is rejected") {
  const PowerNetwork net = builtin_case(BuiltinCase::two_bus);
  Equilibrium eq = solve_equilibrium(net);
  eq.converged = false;
  CHECK_THROWS_AS((void)build_state_space(net, eq), ModelError);
}
