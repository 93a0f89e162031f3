#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gridcert/sdp.hpp"

using namespace gridcert;

namespace {

AffineBlock dense_block(int num_vars,
                        const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f) {
  return block_from_map(num_vars, f);
}

}  // namespace

TEST_CASE("scalar bound: maximize y subject to y <= 3 and y >= -1") {
  SdpProblem p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f(1, 1);
    f(0, 0) = 3.0 - y(0);
    return f;
  }));
  p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f(1, 1);
    f(0, 0) = y(0) + 1.0;
    return f;
  }));
  const SdpResult r = solve_sdp(p);
  REQUIRE(r.status == SdpStatus::optimal);
  CHECK(r.y(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.min_block_eig >= -1e-12);
}

TEST_CASE("largest eigenvalue as an SDP") {
  // minimize t s.t. t*I - A >= 0 gives t = lambda_max(A).
  Eigen::MatrixXd a(3, 3);
  a << 2, 1, 0, 1, 3, 1, 0, 1, 4;
  const double lmax =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
  SdpProblem p;
  p.num_vars = 1;
  p.objective = -Eigen::VectorXd::Ones(1);  // maximize -t
  p.blocks.push_back(dense_block(1, [&](const Eigen::VectorXd& y) {
    return Eigen::MatrixXd(y(0) * Eigen::MatrixXd::Identity(3, 3) - a);
  }));
  const SdpResult r = solve_sdp(p);
  REQUIRE(r.status == SdpStatus::optimal);
  CHECK(r.y(0) == doctest::Approx(lmax).epsilon(1e-6));
}

TEST_CASE("equality constraints are honored exactly") {
  // maximize y0 + y1 s.t. y0 + 2 y1 = 1, diag(2 - y0, 2 - y1, y0 + 1, y1 + 1) >= 0.
  // On the line y0 = 1 - 2 y1 the objective is 1 - y1, pushed down until the
  // bound y0 <= 2 binds: optimum (2, -1/2) with value 3/2.
  SdpProblem p;
  p.num_vars = 2;
  p.objective = Eigen::VectorXd::Ones(2);
  p.eq_a = Eigen::MatrixXd(1, 2);
  p.eq_a << 1.0, 2.0;
  p.eq_b = Eigen::VectorXd::Ones(1);
  p.blocks.push_back(dense_block(2, [](const Eigen::VectorXd& y) {
    Eigen::VectorXd d(4);
    d << 2.0 - y(0), 2.0 - y(1), y(0) + 1.0, y(1) + 1.0;
    return Eigen::MatrixXd(d.asDiagonal());
  }));
  const SdpResult r = solve_sdp(p);
  REQUIRE(r.status == SdpStatus::optimal);
  CHECK(r.eq_residual < 1e-9);
  CHECK(r.y(0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.y(1) == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(r.objective == doctest::Approx(1.5).epsilon(1e-5));
}

TEST_CASE("the 2x2 correlation corner") {
  // maximize y s.t. [[1, y], [y, 1]] >= 0  ->  y* = 1.
  SdpProblem p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f(2, 2);
    f << 1.0, y(0), y(0), 1.0;
    return f;
  }));
  const SdpResult r = solve_sdp(p);
  REQUIRE(r.status == SdpStatus::optimal);
  CHECK(r.y(0) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("infeasible problems are reported as such") {
  SUBCASE("contradictory scalar bounds") {
    SdpProblem p;
    p.num_vars = 1;
    p.objective = Eigen::VectorXd::Ones(1);
    p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
      Eigen::MatrixXd f(1, 1);
      f(0, 0) = -1.0 - y(0) * 0.0;  // constant -1 block can never be psd
      return f;
    }));
    const SdpResult r = solve_sdp(p);
    CHECK(r.status == SdpStatus::infeasible);
    CHECK(!r.message.empty());
  }
  SUBCASE("inconsistent equalities") {
    SdpProblem p;
    p.num_vars = 1;
    p.objective = Eigen::VectorXd::Ones(1);
    p.eq_a = Eigen::MatrixXd(2, 1);
    p.eq_a << 1.0, 1.0;
    p.eq_b = Eigen::VectorXd(2);
    p.eq_b << 0.0, 1.0;  // y = 0 and y = 1
    p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
      Eigen::MatrixXd f(1, 1);
      f(0, 0) = 1.0 + y(0);
      return f;
    }));
    const SdpResult r = solve_sdp(p);
    CHECK(r.status == SdpStatus::infeasible);
    CHECK(r.message.find("equality") != std::string::npos);
  }
}

TEST_CASE("block probing reconstructs an affine map") {
  Eigen::MatrixXd f0(2, 2), b0(2, 2), b1(2, 2);
  f0 << 1, 2, 2, 5;
  b0 << 0, 1, 1, 0;
  b1 << 3, 0, 0, -1;
  const AffineBlock blk = block_from_map(2, [&](const Eigen::VectorXd& y) {
    return Eigen::MatrixXd(f0 + y(0) * b0 + y(1) * b1);
  });
  Eigen::VectorXd y(2);
  y << 0.7, -1.3;
  const Eigen::MatrixXd direct = f0 + y(0) * b0 + y(1) * b1;
  CHECK((blk.eval(y) - direct).norm() == doctest::Approx(0.0));
  CHECK(blk.dim == 2);
}

TEST_CASE("solver is deterministic") {
  auto build = [] {
    SdpProblem p;
    p.num_vars = 2;
    p.objective = Eigen::VectorXd(2);
    p.objective << 1.0, 0.5;
    p.blocks.push_back(block_from_map(2, [](const Eigen::VectorXd& y) {
      Eigen::MatrixXd f(2, 2);
      f << 2.0 - y(0), y(1), y(1), 1.0 + y(0) - y(1);
      return f;
    }));
    return p;
  };
  const SdpResult a = solve_sdp(build());
  const SdpResult b = solve_sdp(build());
  REQUIRE(a.status == SdpStatus::optimal);
  CHECK(a.y(0) == b.y(0));
  CHECK(a.y(1) == b.y(1));
  CHECK(a.newton_iterations == b.newton_iterations);
}

TEST_CASE("interior start hint is honored") {
  // Same bound problem, but seeded from a strictly feasible point.
  SdpProblem p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  p.start = Eigen::VectorXd::Zero(1);
  p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f(1, 1);
    f(0, 0) = 3.0 - y(0);
    return f;
  }));
  p.blocks.push_back(dense_block(1, [](const Eigen::VectorXd& y) {
    Eigen::MatrixXd f(1, 1);
    f(0, 0) = y(0) + 1.0;
    return f;
  }));
  const SdpResult r = solve_sdp(p);
  REQUIRE(r.status == SdpStatus::optimal);
  CHECK(r.y(0) == doctest::Approx(3.0).epsilon(1e-6));
}
