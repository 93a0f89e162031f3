#include "gridcert/screening.hpp"

#include <cmath>
#include <utility>

#include "json.hpp"

namespace gridcert {
namespace {

VminResult run_estimator(const StateSpaceModel& sys, const Certificate& cert,
                         VminMethod method, const VminOptions& options) {
  switch (method) {
    case VminMethod::convex:
      return vmin_convex(sys, cert);
    case VminMethod::approx:
      return vmin_approx(sys, cert);
    case VminMethod::exact:
    default:
      return vmin_exact(sys, cert, options);
  }
}

bool region_ok(const StateSpaceModel& sys, VminMethod method,
               const Eigen::VectorXd& x) {
  return method == VminMethod::convex ? sys.in_convexity_region(x)
                                      : sys.in_polytope(x);
}

CertificateConstraint level_constraint(const StateSpaceModel& sys,
                                       const Eigen::VectorXd& x0,
                                       double bound) {
  // V-bar(x0) is linear in (Q, K): 1/2 x0'Qx0 + sum_e K_e pot_e(delta_e(x0)).
  CertificateConstraint extra;
  extra.q_coeff = 0.5 * x0 * x0.transpose();
  extra.k_coeff.resize(sys.m);
  const Eigen::VectorXd angles = sys.edge_angles(x0);
  for (int e = 0; e < sys.m; ++e) {
    extra.k_coeff(e) = edge_potential(sys, e, angles(e));
  }
  extra.bound = bound;
  return extra;
}

}  // namespace

std::vector<Contingency> parse_contingencies(const std::string& json_text) {
  std::vector<Contingency> out;
  try {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    const nlohmann::json& list =
        doc.is_array() ? doc : doc.at("contingencies");
    for (const auto& item : list) {
      Contingency c;
      c.label = item.value("label", "contingency-" + std::to_string(out.size()));
      const std::vector<double> delta =
          item.at("delta").get<std::vector<double>>();
      const std::vector<double> omega =
          item.at("omega").get<std::vector<double>>();
      if (delta.size() != omega.size())
        throw ModelError("contingency delta and omega lengths differ");
      c.angles = Eigen::Map<const Eigen::VectorXd>(
          delta.data(), static_cast<long>(delta.size()));
      c.velocities = Eigen::Map<const Eigen::VectorXd>(
          omega.data(), static_cast<long>(omega.size()));
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("bad contingency json: ") + e.what());
  }
  return out;
}

std::string serialize_contingencies(const std::vector<Contingency>& list) {
  nlohmann::json doc;
  doc["contingencies"] = nlohmann::json::array();
  for (const Contingency& c : list) {
    nlohmann::json item;
    item["label"] = c.label;
    item["delta"] = std::vector<double>(
        c.angles.data(), c.angles.data() + c.angles.size());
    item["omega"] = std::vector<double>(
        c.velocities.data(), c.velocities.data() + c.velocities.size());
    doc["contingencies"].push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

Eigen::VectorXd contingency_state(const StateSpaceModel& sys,
                                  const Contingency& c) {
  if (c.angles.size() != sys.n || c.velocities.size() != sys.n) {
    throw ModelError("contingency size does not match the network");
  }
  Eigen::VectorXd x(2 * sys.n);
  x.head(sys.n) = c.angles - sys.eq_angles;
  x.tail(sys.n) = c.velocities;
  return x;
}

ScreeningVerdict screen(const StateSpaceModel& sys, const Certificate& cert,
                        const VminResult& vmin, const Contingency& c) {
  ScreeningVerdict verdict;
  verdict.label = c.label;
  verdict.method = vmin.method;
  verdict.vmin_value = vmin.value;
  const Eigen::VectorXd x = contingency_state(sys, c);
  verdict.v_at_state = evaluate_v(sys, cert, x);
  if (vmin.status != VminStatus::ok) {
    verdict.outcome = Outcome::undecided;
    verdict.reason = "boundary estimate unavailable: " + vmin.note;
    return verdict;
  }
  if (!region_ok(sys, vmin.method, x)) {
    verdict.outcome = Outcome::undecided;
    verdict.reason = vmin.method == VminMethod::convex
                         ? "state outside the convexity region"
                         : "state outside the decay polytope";
    return verdict;
  }
  if (verdict.v_at_state < vmin.value) {
    verdict.outcome = Outcome::certified;
    verdict.reason = "inside invariant set";
  } else {
    verdict.outcome = Outcome::undecided;
    verdict.reason = "level exceeds the boundary minimum";
  }
  return verdict;
}

std::vector<ScreeningVerdict> batch_screen(const StateSpaceModel& sys,
                                           const Certificate& cert,
                                           const VminResult& vmin,
                                           const std::vector<Contingency>& list) {
  std::vector<ScreeningVerdict> out;
  out.reserve(list.size());
  for (const Contingency& c : list) out.push_back(screen(sys, cert, vmin, c));
  return out;
}

AdaptResult adapt(const LmiProblem& base, const Contingency& c,
                  const AdaptOptions& options) {
  const StateSpaceModel& sys = base.sys;
  AdaptResult result;
  const Eigen::VectorXd x0 = contingency_state(sys, c);
  if (!sys.in_polytope(x0)) {
    result.status = "outside_polytope";
    return result;
  }
  VminMethod method = options.schedule_method.value_or(
      sys.in_convexity_region(x0) ? VminMethod::convex : VminMethod::exact);

  CandidateResult cand = find_candidate(base, options.solver);
  if (cand.status != CandidateStatus::found) {
    result.status = "initial_infeasible";
    return result;
  }
  VminResult est = run_estimator(sys, cand.cert, method, options.vmin_options);
  if (est.status != VminStatus::ok && method != VminMethod::exact) {
    method = VminMethod::exact;
    est = run_estimator(sys, cand.cert, method, options.vmin_options);
  }

  auto certified_now = [&](const VminResult& vmin, double v_at) {
    return vmin.status == VminStatus::ok && region_ok(sys, vmin.method, x0) &&
           v_at < vmin.value;
  };

  double v_at = evaluate_v(sys, cand.cert, x0);
  result.steps.push_back(
      {1, est.value, v_at, 0.0, cand.cert.margin, true});
  result.cert = cand.cert;

  // Boundary minimizers seen so far. Re-solves maximize the smallest V over
  // these accumulated witness states: pinning the previous minimizers from
  // below forces the boundary minimum up toward the cap instead of letting
  // it reappear elsewhere.
  std::vector<CertificateConstraint> cuts;
  auto remember_witness = [&](const VminResult& vmin) {
    if (vmin.witness.size() != 2 * sys.n) return false;
    for (const CertificateConstraint& cut : cuts) {
      if ((0.5 * vmin.witness * vmin.witness.transpose() - cut.q_coeff)
              .cwiseAbs()
              .maxCoeff() < 1e-9) {
        return false;
      }
    }
    cuts.push_back(level_constraint(sys, vmin.witness, 0.0));
    return true;
  };
  remember_witness(est);

  bool certified = certified_now(est, v_at);
  const CertificateConstraint at_state = level_constraint(sys, x0, 0.0);

  // The family is a cone, so when no member certifies x0 the gap V_min - V(x0)
  // tends to zero from below as a member shrinks. Solves that maximize the gap
  // therefore carry a floor on V(x0); it rules out no level ratio, because any
  // member below the floor can be scaled back up to it.
  auto scale_floor = [&](double level) {
    CertificateConstraint f = at_state;
    f.q_coeff = -f.q_coeff;
    f.k_coeff = -f.k_coeff;
    f.bound = -level;
    return f;
  };

  // Refine the initial member before any level descent: the margin-max
  // member rarely maximizes the certification gap V_min - V(x0), which is
  // concave in (Q, K), so cutting-plane rounds on the witness set converge
  // toward the family's best gap. Members certifying x0 from above the
  // first V_min are invisible to the descending schedule below.
  if (!certified && !cuts.empty()) {
    LmiProblem floored = base;
    floored.extras.push_back(scale_floor(0.5 * v_at));
    for (int round = 0; round < std::max(1, options.inner_rounds); ++round) {
      const CandidateResult next =
          find_candidate_directed(floored, cuts, &at_state, options.solver);
      if (next.status != CandidateStatus::found) break;
      const VminResult nest =
          run_estimator(sys, next.cert, method, options.vmin_options);
      if (nest.status != VminStatus::ok) break;
      const double nv = evaluate_v(sys, next.cert, x0);
      const bool fresh_cut = remember_witness(nest);
      // Compare members by the scale-free ratio V(x0) / V_min; the raw gap
      // would favour whichever member happens to be smaller overall.
      if (nest.value > 0 && nv / nest.value < v_at / est.value) {
        cand = next;
        est = nest;
        v_at = nv;
      }
      if (certified_now(nest, nv)) {
        cand = next;
        est = nest;
        v_at = nv;
        certified = true;
        break;
      }
      if (!fresh_cut) break;
    }
    result.steps.back() = {1, est.value, v_at, 0.0, cand.cert.margin, true};
    result.cert = cand.cert;
  }

  const double first_vmin = est.value;
  double eps = options.eps0_rel * first_vmin;
  const double eps_min = options.eps_min_rel * first_vmin;
  int iteration = 1;

  while (!certified && iteration < options.max_iterations) {
    const double bound = est.value - eps;
    bool solved = false;
    if (bound > 0) {
      LmiProblem tightened = base;
      tightened.extras.push_back(level_constraint(sys, x0, bound));
      tightened.extras.push_back(scale_floor(0.5 * bound));
      // Cutting-plane rounds at this fixed bound: each re-solve maximizes
      // min over witnesses of V(w) - V(x0). Stop once a round certifies or
      // the witness set stops growing (the cutting-plane model is tight).
      bool have = false;
      CandidateResult round_best;
      VminResult round_est;
      double round_v = 0;
      bool round_certified = false;
      for (int round = 0; round < std::max(1, options.inner_rounds); ++round) {
        const CandidateResult next =
            cuts.empty() ? find_candidate(tightened, options.solver)
                         : find_candidate_directed(tightened, cuts, &at_state,
                                                   options.solver);
        if (next.status != CandidateStatus::found) break;
        const VminResult nest =
            run_estimator(sys, next.cert, method, options.vmin_options);
        const double nv = evaluate_v(sys, next.cert, x0);
        if (!have || nest.value > round_est.value) {
          round_best = next;
          round_est = nest;
          round_v = nv;
          have = true;
        }
        const bool fresh_cut = remember_witness(nest);
        if (certified_now(nest, nv)) {
          round_best = next;
          round_est = nest;
          round_v = nv;
          round_certified = true;
          break;
        }
        if (!fresh_cut) break;
      }
      if (have) {
        ++iteration;
        cand = round_best;
        est = round_est;
        v_at = round_v;
        result.steps.push_back(
            {iteration, est.value, v_at, eps, cand.cert.margin, true});
        result.cert = cand.cert;
        certified = round_certified || certified_now(est, v_at);
        solved = true;
        // The amount the check missed by sets the scale worth trying next;
        // a fixed eps would step far past a nearby certifiable level.
        const double gap = v_at - est.value;
        if (!certified && gap > 0 && 2.0 * gap < eps) eps = 2.0 * gap;
      }
    }
    if (!solved) {
      eps *= 0.5;
      if (eps < eps_min) {
        result.status = "eps_exhausted";
        break;
      }
    }
  }

  // Judge the final certificate; an exact pass can only widen the region.
  VminResult final_est = est;
  double final_v = v_at;
  bool final_certified = certified;
  if (options.final_exact_pass && method != VminMethod::exact) {
    const VminResult exact =
        vmin_exact(sys, result.cert, options.vmin_options);
    if (certified_now(exact, final_v)) {
      final_est = exact;
      final_certified = true;
    } else if (!final_certified) {
      // keep the schedule estimate in the report
    }
  }
  result.final_vmin = final_est;
  result.final_v_at_state = final_v;
  if (final_certified) {
    result.outcome = Outcome::certified;
    result.status = "certified";
  } else if (result.status.empty()) {
    result.status = iteration >= options.max_iterations ? "max_iterations"
                                                        : "eps_exhausted";
  }
  return result;
}

}  // namespace gridcert
