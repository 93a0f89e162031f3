#include "gridcert/vmin.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace gridcert {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStrictSlack = 1e-10;

// Linear inequality a.x + b >= 0 in state coordinates.
struct LinearIneq {
  Eigen::VectorXd a;
  double b = 0;
};

// Affine chart of a boundary piece: x = x0 + basis * z with orthonormal
// basis columns, plus the inequalities that keep the point on the piece.
struct FacetChart {
  Eigen::VectorXd x0;
  Eigen::MatrixXd basis;
  std::vector<LinearIneq> ineqs;

  [[nodiscard]] Eigen::VectorXd lift(const Eigen::VectorXd& z) const {
    return x0 + basis * z;
  }
  [[nodiscard]] int dim() const { return static_cast<int>(basis.cols()); }
  [[nodiscard]] double min_slack(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd x = lift(z);
    double worst = kInf;
    for (const LinearIneq& q : ineqs) worst = std::min(worst, q.a.dot(x) + q.b);
    return worst;
  }
};

FacetChart make_chart(int state_dim,
                      const std::vector<std::pair<Eigen::VectorXd, double>>& eqs,
                      std::vector<LinearIneq> ineqs) {
  FacetChart chart;
  chart.ineqs = std::move(ineqs);
  if (eqs.empty()) {
    chart.x0 = Eigen::VectorXd::Zero(state_dim);
    chart.basis = Eigen::MatrixXd::Identity(state_dim, state_dim);
    return chart;
  }
  Eigen::MatrixXd a(static_cast<int>(eqs.size()), state_dim);
  Eigen::VectorXd b(static_cast<int>(eqs.size()));
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    a.row(static_cast<int>(i)) = eqs[i].first.transpose();
    b(static_cast<int>(i)) = eqs[i].second;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++rank;
  }
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < rank; ++i) inv_sv(i) = 1.0 / sv(i);
  chart.x0 = svd.matrixV().leftCols(sv.size()) * inv_sv.asDiagonal() *
             svd.matrixU().transpose() * b;
  chart.basis = svd.matrixV().rightCols(state_dim - rank);
  return chart;
}

// f(z) -> value (and optionally gradient/Hessian); returns false outside the
// domain of the barrier terms.
using SmoothFn = std::function<bool(const Eigen::VectorXd&, double&,
                                    Eigen::VectorXd*, Eigen::MatrixXd*)>;

Eigen::VectorXd newton_minimize(const SmoothFn& fn, Eigen::VectorXd z,
                                int max_iter, double grad_tol) {
  if (z.size() == 0) return z;
  double val = 0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  if (!fn(z, val, &grad, &hess)) return z;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (grad.norm() <= grad_tol) break;
    Eigen::MatrixXd h = hess;
    const double lam_min =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h,
                                                       Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    if (lam_min < 1e-9) {
      h.diagonal().array() += -lam_min + std::max(1e-9, 1e-2 * std::abs(lam_min));
    }
    const Eigen::VectorXd dz = h.llt().solve(-grad);
    if (!dz.allFinite()) break;
    const double slope = grad.dot(dz);
    double alpha = 1.0;
    bool accepted = false;
    for (int half = 0; half < 50; ++half) {
      double trial_val = 0;
      const Eigen::VectorXd trial = z + alpha * dz;
      if (fn(trial, trial_val, nullptr, nullptr) &&
          trial_val <= val + 1e-4 * alpha * slope) {
        z = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    if (!fn(z, val, &grad, &hess)) break;
  }
  return z;
}

Eigen::MatrixXd v_hessian(const StateSpaceModel& sys, const Certificate& cert,
                          const Eigen::VectorXd& x) {
  const Eigen::VectorXd cosines = sys.edge_angles(x).array().cos();
  return cert.q + sys.c_mat.transpose() *
                      cert.k.cwiseProduct(cosines).asDiagonal() * sys.c_mat;
}

// Barrier objective: V-bar plus -mu * log of every inequality slack.
SmoothFn barrier_objective(const StateSpaceModel& sys, const Certificate& cert,
                           const FacetChart& chart, double mu) {
  return [&sys, &cert, &chart, mu](const Eigen::VectorXd& z, double& val,
                                   Eigen::VectorXd* grad,
                                   Eigen::MatrixXd* hess) {
    const Eigen::VectorXd x = chart.lift(z);
    val = evaluate_v(sys, cert, x);
    Eigen::VectorXd gx;
    Eigen::MatrixXd hx;
    if (grad != nullptr) {
      gx = evaluate_v_gradient(sys, cert, x);
      hx = v_hessian(sys, cert, x);
    }
    for (const LinearIneq& q : chart.ineqs) {
      const double s = q.a.dot(x) + q.b;
      if (s <= kStrictSlack) return false;
      val -= mu * std::log(s);
      if (grad != nullptr) {
        gx -= (mu / s) * q.a;
        hx += (mu / (s * s)) * (q.a * q.a.transpose());
      }
    }
    if (grad != nullptr) {
      *grad = chart.basis.transpose() * gx;
      *hess = chart.basis.transpose() * hx * chart.basis;
    }
    return true;
  };
}

// Barrier objective for the flow-rate maximization: minimize -obj.x with
// containment barriers and the sublevel barrier -mu*log(level - V-bar).
SmoothFn flow_objective(const StateSpaceModel& sys, const Certificate& cert,
                        const FacetChart& chart, const Eigen::VectorXd& obj,
                        double level, double mu) {
  return [&sys, &cert, &chart, &obj, level, mu](const Eigen::VectorXd& z,
                                                double& val,
                                                Eigen::VectorXd* grad,
                                                Eigen::MatrixXd* hess) {
    const Eigen::VectorXd x = chart.lift(z);
    val = -obj.dot(x);
    Eigen::VectorXd gx;
    Eigen::MatrixXd hx;
    if (grad != nullptr) {
      gx = -obj;
      hx = Eigen::MatrixXd::Zero(x.size(), x.size());
    }
    for (const LinearIneq& q : chart.ineqs) {
      const double s = q.a.dot(x) + q.b;
      if (s <= kStrictSlack) return false;
      val -= mu * std::log(s);
      if (grad != nullptr) {
        gx -= (mu / s) * q.a;
        hx += (mu / (s * s)) * (q.a * q.a.transpose());
      }
    }
    const double room = level - evaluate_v(sys, cert, x);
    if (room <= kStrictSlack) return false;
    val -= mu * std::log(room);
    if (grad != nullptr) {
      const Eigen::VectorXd vg = evaluate_v_gradient(sys, cert, x);
      gx += (mu / room) * vg;
      hx += (mu / (room * room)) * (vg * vg.transpose()) +
            (mu / room) * v_hessian(sys, cert, x);
    }
    if (grad != nullptr) {
      *grad = chart.basis.transpose() * gx;
      *hess = chart.basis.transpose() * hx * chart.basis;
    }
    return true;
  };
}

// Push a start into the strict interior of the chart inequalities by
// penalized least squares; empty when the chart has no usable interior.
std::optional<Eigen::VectorXd> repair_start(const FacetChart& chart,
                                            Eigen::VectorXd z) {
  constexpr double kTarget = 1e-4;
  if (chart.min_slack(z) > kTarget) return z;
  for (int iter = 0; iter < 120; ++iter) {
    const Eigen::VectorXd x = chart.lift(z);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(z.size());
    double penalty = 0;
    for (const LinearIneq& q : chart.ineqs) {
      const double gap = kTarget - (q.a.dot(x) + q.b);
      if (gap > 0) {
        penalty += gap * gap;
        grad -= 2.0 * gap * (chart.basis.transpose() * q.a);
      }
    }
    if (penalty == 0) return z;
    double alpha = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd trial = z - alpha * grad;
      const Eigen::VectorXd tx = chart.lift(trial);
      double tp = 0;
      for (const LinearIneq& q : chart.ineqs) {
        const double gap = kTarget - (q.a.dot(tx) + q.b);
        if (gap > 0) tp += gap * gap;
      }
      if (tp < penalty) {
        z = trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  return chart.min_slack(z) > kTarget / 2 ? std::optional<Eigen::VectorXd>(z)
                                          : std::nullopt;
}

std::vector<Eigen::VectorXd> build_seeds(const StateSpaceModel& sys,
                                         const FacetChart& chart,
                                         std::mt19937_64& rng, int count,
                                         double velocity_box) {
  std::vector<Eigen::VectorXd> seeds;
  const std::optional<Eigen::VectorXd> anchor =
      repair_start(chart, Eigen::VectorXd::Zero(chart.dim()));
  if (!anchor) return seeds;
  seeds.push_back(*anchor);
  std::uniform_real_distribution<double> ang(-std::numbers::pi,
                                             std::numbers::pi);
  std::uniform_real_distribution<double> vel(-velocity_box, velocity_box);
  for (int i = 1; i < count; ++i) {
    Eigen::VectorXd x(2 * sys.n);
    for (int k = 0; k < sys.n; ++k) x(k) = ang(rng);
    for (int k = 0; k < sys.n; ++k) x(sys.n + k) = vel(rng);
    Eigen::VectorXd z = chart.basis.transpose() * (x - chart.x0);
    bool ok = chart.min_slack(z) > kStrictSlack;
    for (int shrink = 0; shrink < 50 && !ok; ++shrink) {
      z = *anchor + 0.7 * (z - *anchor);
      ok = chart.min_slack(z) > kStrictSlack;
    }
    if (ok) seeds.push_back(z);
  }
  return seeds;
}

struct ChartMinimum {
  double value = kInf;
  Eigen::VectorXd x;
};

// All per-seed local minima of V-bar over the chart.
std::vector<ChartMinimum> minimize_on_chart(
    const StateSpaceModel& sys, const Certificate& cert,
    const FacetChart& chart, const std::vector<Eigen::VectorXd>& seeds,
    double tol) {
  static constexpr double kStages[] = {1e-2, 1e-4, 1e-6, 1e-8};
  std::vector<ChartMinimum> out;
  for (const Eigen::VectorXd& seed : seeds) {
    Eigen::VectorXd z = seed;
    for (double mu : kStages) {
      z = newton_minimize(barrier_objective(sys, cert, chart, mu), z, 150,
                          std::max(tol, mu));
    }
    ChartMinimum m;
    m.x = chart.lift(z);
    m.value = evaluate_v(sys, cert, m.x);
    out.push_back(std::move(m));
  }
  return out;
}

Eigen::VectorXd facet_row(const StateSpaceModel& sys, int edge) {
  return sys.c_mat.row(edge).transpose();
}

Eigen::VectorXd flow_row(const StateSpaceModel& sys, int edge) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(2 * sys.n);
  row.tail(sys.n) = sys.incidence.row(edge).transpose();
  return row;
}

std::vector<LinearIneq> containment_ineqs(const StateSpaceModel& sys,
                                          int skip_edge, double half_width,
                                          double center_scale) {
  // |(C x)_u + center_scale * delta*_u| <= half_width for u != skip_edge.
  std::vector<LinearIneq> out;
  for (int u = 0; u < sys.m; ++u) {
    if (u == skip_edge) continue;
    const Eigen::VectorXd row = sys.c_mat.row(u).transpose();
    const double shift = center_scale * sys.eq_delta(u);
    out.push_back({-row, half_width - shift});
    out.push_back({row, half_width + shift});
  }
  return out;
}

std::uint64_t facet_seed(std::uint64_t base, int ordinal) {
  return base + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(ordinal + 1);
}

}  // namespace

VminResult vmin_exact(const StateSpaceModel& sys, const Certificate& cert,
                      const VminOptions& options) {
  VminResult result;
  result.method = VminMethod::exact;
  result.value = kInf;
  const std::vector<Facet> facets = sys.facets();
  int ordinal = 0;
  for (const Facet& facet : facets) {
    const double r = facet.theta - sys.eq_delta(facet.edge);
    std::mt19937_64 rng(facet_seed(options.seed, ordinal));
    ++ordinal;

    const std::vector<LinearIneq> contain =
        containment_ineqs(sys, facet.edge, std::numbers::pi, 2.0);
    const FacetChart chart =
        make_chart(2 * sys.n, {{facet_row(sys, facet.edge), r}}, contain);
    const FacetChart chart_flow = make_chart(
        2 * sys.n,
        {{facet_row(sys, facet.edge), r}, {flow_row(sys, facet.edge), 0.0}},
        contain);

    const std::vector<Eigen::VectorXd> seeds =
        build_seeds(sys, chart, rng, options.starts_per_facet,
                    options.velocity_box);
    const std::vector<Eigen::VectorXd> seeds_flow =
        build_seeds(sys, chart_flow, rng, options.starts_per_facet,
                    options.velocity_box);
    if (seeds.empty() && seeds_flow.empty()) {
      result.status = VminStatus::degraded;
      result.note += "no feasible start on facet " +
                     std::to_string(facet.edge) +
                     (facet.sign > 0 ? "+; " : "-; ");
      continue;
    }

    double facet_best = kInf;
    Eigen::VectorXd facet_x;
    const Eigen::VectorXd out_dir = flow_row(sys, facet.edge);
    for (const ChartMinimum& m :
         minimize_on_chart(sys, cert, chart, seeds, options.tol)) {
      const double outward = r * out_dir.dot(m.x);
      if (outward >= -1e-10 && m.value < facet_best) {
        facet_best = m.value;
        facet_x = m.x;
      }
    }
    for (const ChartMinimum& m :
         minimize_on_chart(sys, cert, chart_flow, seeds_flow, options.tol)) {
      if (m.value < facet_best) {
        facet_best = m.value;
        facet_x = m.x;
      }
    }
    if (facet_best < result.value) {
      result.value = facet_best;
      result.witness = facet_x;
      result.facet_edge = facet.edge;
      result.facet_sign = facet.sign;
    }
  }
  if (result.witness.size() == 0) {
    result.status = VminStatus::degraded;
    result.value = 0;
    result.note += "no facet produced a minimizer";
  }
  return result;
}

VminResult vmin_convex(const StateSpaceModel& sys, const Certificate& cert) {
  VminResult result;
  result.method = VminMethod::convex;
  result.value = kInf;
  for (int e = 0; e < sys.m; ++e) {
    if (std::abs(sys.eq_delta(e)) >= std::numbers::pi / 2 - 1e-12) {
      result.status = VminStatus::unsupported;
      result.value = 0;
      result.note = "equilibrium edge angle reaches pi/2 on edge " +
                    std::to_string(e);
      return result;
    }
  }
  for (int e = 0; e < sys.m; ++e) {
    for (int sign : {+1, -1}) {
      const double target = sign * std::numbers::pi / 2 - sys.eq_delta(e);
      const std::vector<LinearIneq> contain =
          containment_ineqs(sys, e, std::numbers::pi / 2, 1.0);
      const FacetChart chart =
          make_chart(2 * sys.n, {{facet_row(sys, e), target}}, contain);
      const std::optional<Eigen::VectorXd> anchor =
          repair_start(chart, Eigen::VectorXd::Zero(chart.dim()));
      if (!anchor) {
        result.status = VminStatus::degraded;
        result.note += "no interior start on convex facet " +
                       std::to_string(e) + (sign > 0 ? "+; " : "-; ");
        continue;
      }
      const std::vector<ChartMinimum> mins =
          minimize_on_chart(sys, cert, chart, {*anchor}, 1e-9);
      for (const ChartMinimum& m : mins) {
        if (m.value < result.value) {
          result.value = m.value;
          result.witness = m.x;
          result.facet_edge = e;
          result.facet_sign = sign;
        }
      }
    }
  }
  if (result.witness.size() == 0 && result.status == VminStatus::ok) {
    result.status = VminStatus::degraded;
    result.value = 0;
    result.note = "no convex facet produced a minimizer";
  }
  return result;
}

VminResult vmin_approx(const StateSpaceModel& sys, const Certificate& cert) {
  VminResult result;
  result.method = VminMethod::approx;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cert.q,
                                                           Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-12) {
    result.status = VminStatus::unsupported;
    result.note = "quadratic part is singular";
    return result;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(cert.q);
  result.value = kInf;
  for (const Facet& facet : sys.facets()) {
    const Eigen::VectorXd row = facet_row(sys, facet.edge);
    const double quad = row.dot(llt.solve(row));
    const double r = facet.theta - sys.eq_delta(facet.edge);
    const double value = r * r / (2.0 * quad) +
                         cert.k(facet.edge) *
                             edge_potential(sys, facet.edge, facet.theta);
    if (value < result.value) {
      result.value = value;
      result.facet_edge = facet.edge;
      result.facet_sign = facet.sign;
    }
  }
  return result;
}

double g_of_v(const StateSpaceModel& sys, const Certificate& cert, double v,
              const VminOptions& options) {
  static constexpr double kStages[] = {1e-2, 1e-4, 1e-6, 1e-8};
  double best = -kInf;
  int ordinal = 0;
  for (const Facet& facet : sys.facets()) {
    const double r = facet.theta - sys.eq_delta(facet.edge);
    std::mt19937_64 rng(facet_seed(options.seed ^ 0x5bf03635ULL, ordinal));
    ++ordinal;
    const FacetChart chart =
        make_chart(2 * sys.n, {{facet_row(sys, facet.edge), r}},
                   containment_ineqs(sys, facet.edge, std::numbers::pi, 2.0));
    const std::vector<Eigen::VectorXd> seeds =
        build_seeds(sys, chart, rng, options.starts_per_facet,
                    options.velocity_box);
    if (seeds.empty()) continue;

    // Cheapest point of the facet decides whether the sublevel set reaches it.
    const std::vector<ChartMinimum> mins =
        minimize_on_chart(sys, cert, chart, {seeds.front()}, options.tol);
    if (mins.empty() || mins.front().value >= v) continue;
    const Eigen::VectorXd z_low =
        chart.basis.transpose() * (mins.front().x - chart.x0);

    const Eigen::VectorXd obj = r * flow_row(sys, facet.edge);
    std::vector<Eigen::VectorXd> flow_seeds;
    flow_seeds.push_back(z_low);
    for (std::size_t i = 1; i < seeds.size(); ++i) {
      Eigen::VectorXd z = seeds[i];
      bool ok = false;
      for (int shrink = 0; shrink < 60; ++shrink) {
        if (chart.min_slack(z) > kStrictSlack &&
            evaluate_v(sys, cert, chart.lift(z)) < v - kStrictSlack) {
          ok = true;
          break;
        }
        z = z_low + 0.7 * (z - z_low);
      }
      if (ok) flow_seeds.push_back(z);
    }
    for (const Eigen::VectorXd& seed : flow_seeds) {
      Eigen::VectorXd z = seed;
      for (double mu : kStages) {
        z = newton_minimize(flow_objective(sys, cert, chart, obj, v, mu), z,
                            150, std::max(options.tol, mu));
      }
      best = std::max(best, obj.dot(chart.lift(z)));
    }
  }
  return best;
}

double vmin_bisect(const StateSpaceModel& sys, const Certificate& cert,
                   double v_lo, double v_hi, double rel_tol,
                   const VminOptions& options) {
  double lo = v_lo;
  double hi = v_hi;
  for (int iter = 0; iter < 60 && (hi - lo) > rel_tol * std::max(hi, 1e-12);
       ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (g_of_v(sys, cert, mid, options) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

bool in_invariant_set(const StateSpaceModel& sys, const Certificate& cert,
                      const VminResult& vmin, const Eigen::VectorXd& x) {
  const bool in_region = vmin.method == VminMethod::convex
                             ? sys.in_convexity_region(x)
                             : sys.in_polytope(x);
  return in_region && evaluate_v(sys, cert, x) < vmin.value;
}

}  // namespace gridcert
