// Command-line entry point: model checks, certification, boundary minima,
// screening, adaptation, simulation and energy baselines behind one binary.
// JSON goes to stdout (or --out), CSV to stdout (or --csv). Exit codes:
// 0 success, 1 error, 2 screening left something undecided.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridcert/energy.hpp"
#include "gridcert/equilibrium.hpp"
#include "gridcert/lyapunov.hpp"
#include "gridcert/model.hpp"
#include "gridcert/screening.hpp"
#include "gridcert/simulator.hpp"
#include "gridcert/state_space.hpp"
#include "gridcert/vmin.hpp"
#include "json.hpp"

namespace {

using namespace gridcert;
using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// `spec` is a bundled case name or a path to a network JSON file.
PowerNetwork load_model(const std::string& spec) {
  for (const std::string& name : builtin_case_names()) {
    if (spec == name) return builtin_case(spec);
  }
  return parse_network_file(spec);
}

// Inline JSON (object or list) or a path to a contingency file.
std::vector<Contingency> load_contingencies(const std::string& arg) {
  const std::size_t first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (arg[first] == '{' || arg[first] == '[')) {
    const std::string text =
        arg[first] == '{' ? "[" + arg + "]" : arg;
    return parse_contingencies(text);
  }
  return parse_contingencies(slurp(arg));
}

Contingency load_single_contingency(const std::string& arg) {
  std::vector<Contingency> list = load_contingencies(arg);
  if (list.size() != 1) {
    throw ModelError("expected exactly one contingency, got " +
                     std::to_string(list.size()));
  }
  return std::move(list.front());
}

SdpSettings solver_settings() {
  SdpSettings s;
  if (const char* env = std::getenv("GRIDCERT_SOLVER_TIME_LIMIT")) {
    try {
      s.time_limit_s = std::stod(env);
    } catch (const std::exception&) {
      throw ModelError(std::string("bad GRIDCERT_SOLVER_TIME_LIMIT: ") + env);
    }
  }
  return s;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw ModelError("cannot write file: " + out_path);
  out << text;
}

std::string format_row(const std::vector<double>& values) {
  std::string row;
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", values[i]);
    if (i) row += ',';
    row += buf;
  }
  row += '\n';
  return row;
}

const char* outcome_name(Outcome o) {
  return o == Outcome::certified ? "certified" : "undecided";
}

const char* method_name(VminMethod m) {
  switch (m) {
    case VminMethod::convex: return "convex";
    case VminMethod::approx: return "approx";
    default: return "exact";
  }
}

VminMethod parse_method(const std::string& name) {
  if (name == "exact") return VminMethod::exact;
  if (name == "convex") return VminMethod::convex;
  if (name == "approx") return VminMethod::approx;
  throw ModelError("unknown estimator: " + name);
}

const char* vmin_status_name(VminStatus s) {
  switch (s) {
    case VminStatus::ok: return "ok";
    case VminStatus::degraded: return "degraded";
    default: return "unsupported";
  }
}

const char* kind_name(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::sep: return "sep";
    case EquilibriumKind::uep: return "uep";
    default: return "degenerate";
  }
}

const char* sim_status_name(SimStatus s) {
  switch (s) {
    case SimStatus::converged: return "converged";
    case SimStatus::diverged: return "diverged";
    case SimStatus::horizon_reached: return "horizon_reached";
    default: return "step_failure";
  }
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json vmin_json(const VminResult& r) {
  json doc;
  doc["method"] = method_name(r.method);
  doc["status"] = vmin_status_name(r.status);
  doc["value"] = r.value;
  doc["witness"] = to_vec(r.witness);
  doc["facet_edge"] = r.facet_edge;
  doc["facet_sign"] = r.facet_sign;
  doc["note"] = r.note;
  return doc;
}

json verdict_json(const ScreeningVerdict& v) {
  json doc;
  doc["label"] = v.label;
  doc["outcome"] = outcome_name(v.outcome);
  doc["reason"] = v.reason;
  doc["v_at_state"] = v.v_at_state;
  doc["vmin_value"] = v.vmin_value;
  doc["method"] = method_name(v.method);
  return doc;
}

VminResult run_vmin(const StateSpaceModel& sys, const Certificate& cert,
                    VminMethod method, const VminOptions& options) {
  switch (method) {
    case VminMethod::convex: return vmin_convex(sys, cert);
    case VminMethod::approx: return vmin_approx(sys, cert);
    default: return vmin_exact(sys, cert, options);
  }
}

struct SysBundle {
  PowerNetwork net;
  Equilibrium eq;
  StateSpaceModel sys;
};

SysBundle build_bundle(const std::string& model_spec) {
  SysBundle b{load_model(model_spec), {}, {}};
  b.eq = solve_equilibrium(b.net);
  if (!b.eq.converged) {
    throw ModelError("equilibrium solve did not converge for this model");
  }
  b.sys = build_state_space(b.net, b.eq);
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Transient-stability certification for lossless swing-equation "
      "networks: Lyapunov certificates, invariant-set boundary minima, "
      "contingency screening and direct simulation."};
  app.require_subcommand(1);

  std::string model_spec;
  std::string cert_path;
  std::string contingency_arg;
  std::string out_path;
  std::string csv_path;
  std::string method_name_opt = "exact";
  std::string objective = "margin";
  std::string schedule = "auto";
  double mu = 1e-6;
  double kmin = -1.0;
  double horizon = 200.0;
  int starts_per_facet = 20;
  int uep_starts = 0;
  int grid = 41;
  int max_iterations = 50;
  std::uint64_t seed = 0;

  const auto add_model = [&](CLI::App* sub) {
    sub->add_option("model", model_spec,
                    "Bundled case (two_bus, nine_bus, new_england_39) or "
                    "network JSON file")
        ->required();
  };

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Check a network model's well-formedness");
  add_model(validate_cmd);

  CLI::App* eq_cmd = app.add_subcommand(
      "equilibrium", "Solve the synchronous operating point");
  add_model(eq_cmd);
  eq_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  CLI::App* certify_cmd = app.add_subcommand(
      "certify", "Solve for a decaying certificate of the family");
  add_model(certify_cmd);
  certify_cmd->add_option("--mu", mu, "Lower bound Q >= mu*I");
  certify_cmd->add_option("--kmin", kmin,
                          "Per-edge floor on K (default scale-relative)");
  certify_cmd->add_option("--objective", objective,
                          "margin (deterministic) or random (seeded)")
      ->check(CLI::IsMember({"margin", "random"}));
  certify_cmd->add_option("--seed", seed, "Seed for --objective random");
  certify_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  CLI::App* vmin_cmd = app.add_subcommand(
      "vmin", "Smallest certificate value over the region boundary");
  add_model(vmin_cmd);
  vmin_cmd->add_option("certificate", cert_path, "Certificate JSON file")
      ->required();
  vmin_cmd->add_option("--method", method_name_opt, "exact | convex | approx")
      ->check(CLI::IsMember({"exact", "convex", "approx"}));
  vmin_cmd->add_option("--starts", starts_per_facet, "Multistarts per facet");
  vmin_cmd->add_option("--seed", seed, "Multistart seed");
  vmin_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  CLI::App* screen_cmd = app.add_subcommand(
      "screen", "Screen contingency states against a fixed certificate");
  add_model(screen_cmd);
  screen_cmd->add_option("certificate", cert_path, "Certificate JSON file")
      ->required();
  screen_cmd
      ->add_option("contingencies", contingency_arg,
                   "Contingency JSON file, or inline JSON")
      ->required();
  screen_cmd->add_option("--method", method_name_opt, "exact | convex | approx")
      ->check(CLI::IsMember({"exact", "convex", "approx"}));
  screen_cmd->add_option("--starts", starts_per_facet, "Multistarts per facet");
  screen_cmd->add_option("--seed", seed, "Multistart seed");
  screen_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  CLI::App* adapt_cmd = app.add_subcommand(
      "adapt", "Adapt the certificate toward one contingency state");
  add_model(adapt_cmd);
  adapt_cmd
      ->add_option("contingency", contingency_arg,
                   "Contingency JSON file, or inline JSON")
      ->required();
  adapt_cmd->add_option("--max-iter", max_iterations, "Iteration budget");
  adapt_cmd
      ->add_option("--schedule", schedule,
                   "Estimator driving the shrink schedule: auto | exact | "
                   "convex | approx")
      ->check(CLI::IsMember({"auto", "exact", "convex", "approx"}));
  adapt_cmd->add_option("--seed", seed, "Multistart seed");
  adapt_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Integrate the post-fault dynamics from a contingency");
  add_model(sim_cmd);
  sim_cmd
      ->add_option("contingency", contingency_arg,
                   "Contingency JSON file, or inline JSON")
      ->required();
  sim_cmd->add_option("--horizon", horizon, "Integration horizon");
  sim_cmd->add_option("--csv", csv_path,
                      "Write the trajectory CSV here; stdout gets a summary");
  sim_cmd->add_option("--certificate", cert_path,
                      "Certificate for the V column (default: solve one)");

  CLI::App* energy_cmd = app.add_subcommand(
      "compare-energy", "Saddle-point search for the critical energy");
  add_model(energy_cmd);
  energy_cmd->add_option("--starts", uep_starts, "Search starts (0 = auto)");
  energy_cmd->add_option("--seed", seed, "Search seed");
  energy_cmd->add_option("--out", out_path, "Write JSON here instead of stdout");

  CLI::App* landscape_cmd = app.add_subcommand(
      "energy-landscape", "Potential-energy surface over angle differences");
  add_model(landscape_cmd);
  landscape_cmd->add_option("--grid", grid, "Samples per axis");
  landscape_cmd->add_option("--csv", csv_path,
                            "Write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      const PowerNetwork net = load_model(model_spec);
      validate(net);
      json doc;
      doc["valid"] = true;
      doc["generators"] = net.generators.size();
      doc["edges"] = net.edges.size();
      doc["state_size"] = net.state_size();
      if (net.infinite_bus)
        doc["infinite_bus"] = *net.infinite_bus;
      else
        doc["infinite_bus"] = nullptr;
      std::cout << doc.dump(2) << "\n";
      return 0;
    }

    if (eq_cmd->parsed()) {
      const PowerNetwork net = load_model(model_spec);
      const Equilibrium eq = solve_equilibrium(net);
      json doc;
      doc["converged"] = eq.converged;
      doc["kind"] = kind_name(eq.kind);
      doc["angles"] = to_vec(eq.angles);
      doc["edge_deltas"] = eq.edge_deltas;
      doc["residual_inf"] = eq.residual_inf;
      doc["iterations"] = eq.iterations;
      doc["zero_modes"] = eq.zero_modes;
      doc["max_real_part"] = eq.max_real_part;
      doc["warnings"] = eq.warnings;
      emit(doc.dump(2) + "\n", out_path);
      return eq.converged ? 0 : 1;
    }

    if (certify_cmd->parsed()) {
      const SysBundle b = build_bundle(model_spec);
      LmiProblem problem = assemble_lmi(b.sys, mu);
      if (kmin >= 0) problem.kappa_min = kmin;
      const SdpSettings settings = solver_settings();
      const CandidateResult r =
          objective == "margin"
              ? find_candidate(problem, settings)
              : find_candidate_randomized(problem, seed, settings);
      if (r.status != CandidateStatus::found) {
        throw ModelError(r.status == CandidateStatus::timeout
                             ? "certificate solve hit the time limit"
                             : "no feasible certificate for this model");
      }
      emit(serialize_certificate(r.cert), out_path);
      return 0;
    }

    if (vmin_cmd->parsed()) {
      const SysBundle b = build_bundle(model_spec);
      const Certificate cert = parse_certificate(slurp(cert_path));
      VminOptions options;
      options.starts_per_facet = starts_per_facet;
      options.seed = seed;
      const VminResult r =
          run_vmin(b.sys, cert, parse_method(method_name_opt), options);
      emit(vmin_json(r).dump(2) + "\n", out_path);
      return r.status == VminStatus::ok ? 0 : 1;
    }

    if (screen_cmd->parsed()) {
      const SysBundle b = build_bundle(model_spec);
      const Certificate cert = parse_certificate(slurp(cert_path));
      const std::vector<Contingency> list =
          load_contingencies(contingency_arg);
      VminOptions options;
      options.starts_per_facet = starts_per_facet;
      options.seed = seed;
      const VminResult vmin =
          run_vmin(b.sys, cert, parse_method(method_name_opt), options);
      const std::vector<ScreeningVerdict> verdicts =
          batch_screen(b.sys, cert, vmin, list);
      json doc;
      doc["vmin"] = vmin_json(vmin);
      doc["verdicts"] = json::array();
      bool all_certified = true;
      for (const ScreeningVerdict& v : verdicts) {
        doc["verdicts"].push_back(verdict_json(v));
        all_certified = all_certified && v.outcome == Outcome::certified;
      }
      emit(doc.dump(2) + "\n", out_path);
      return all_certified ? 0 : 2;
    }

    if (adapt_cmd->parsed()) {
      const SysBundle b = build_bundle(model_spec);
      const Contingency c = load_single_contingency(contingency_arg);
      AdaptOptions options;
      options.max_iterations = max_iterations;
      options.solver = solver_settings();
      options.seed = seed;
      options.vmin_options.seed = seed;
      if (schedule != "auto") options.schedule_method = parse_method(schedule);
      const AdaptResult r = adapt(assemble_lmi(b.sys), c, options);
      json doc;
      doc["label"] = c.label;
      doc["outcome"] = outcome_name(r.outcome);
      doc["status"] = r.status;
      doc["steps"] = json::array();
      for (const AdaptStep& s : r.steps) {
        json step;
        step["iteration"] = s.iteration;
        step["vmin"] = s.vmin;
        step["v_at_state"] = s.v_at_state;
        step["eps"] = s.eps;
        step["margin"] = s.margin;
        doc["steps"].push_back(step);
      }
      doc["final"] = vmin_json(r.final_vmin);
      doc["final"]["v_at_state"] = r.final_v_at_state;
      if (!r.cert.source.empty())
        doc["certificate"] = json::parse(serialize_certificate(r.cert));
      emit(doc.dump(2) + "\n", out_path);
      return r.outcome == Outcome::certified ? 0 : 2;
    }

    if (sim_cmd->parsed()) {
      const SysBundle b = build_bundle(model_spec);
      const Contingency c = load_single_contingency(contingency_arg);
      const Eigen::VectorXd x0 = contingency_state(b.sys, c);
      Certificate cert;
      if (!cert_path.empty()) {
        cert = parse_certificate(slurp(cert_path));
      } else {
        const CandidateResult r =
            find_candidate(assemble_lmi(b.sys), solver_settings());
        if (r.status != CandidateStatus::found)
          throw ModelError("no certificate available for the V column");
        cert = r.cert;
      }
      IntegrateOptions options;
      options.horizon = horizon;
      const Trajectory traj = integrate(b.sys, x0, options);

      std::string csv = "t";
      for (int id : b.net.state_ids()) csv += ",delta_" + std::to_string(id);
      for (int id : b.net.state_ids()) csv += ",omega_" + std::to_string(id);
      csv += ",v_bar,energy\n";
      const int n = b.sys.n;
      for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const Eigen::VectorXd& x = traj.states[i];
        std::vector<double> row;
        row.reserve(2 * n + 3);
        row.push_back(traj.times[i]);
        const Eigen::VectorXd node = b.eq.angles + x.head(n);
        for (int k = 0; k < n; ++k) row.push_back(node(k));
        for (int k = 0; k < n; ++k) row.push_back(x(n + k));
        row.push_back(evaluate_v(b.sys, cert, x));
        row.push_back(energy_value(b.net, b.eq, node, x.tail(n)));
        csv += format_row(row);
      }

      if (csv_path.empty()) {
        std::cout << csv;
      } else {
        emit(csv, csv_path);
        json doc;
        doc["label"] = c.label;
        doc["status"] = sim_status_name(traj.status);
        doc["settled"] = converged_to(b.sys, traj);
        doc["end_time"] = traj.end_time;
        doc["accepted_steps"] = traj.accepted;
        doc["rejected_steps"] = traj.rejected;
        doc["csv"] = csv_path;
        std::cout << doc.dump(2) << "\n";
      }
      return traj.status == SimStatus::step_failure ? 1 : 0;
    }

    if (energy_cmd->parsed()) {
      const PowerNetwork net = load_model(model_spec);
      const Equilibrium eq = solve_equilibrium(net);
      if (!eq.converged)
        throw ModelError("equilibrium solve did not converge for this model");
      UepSearchOptions options;
      options.starts = uep_starts;
      options.seed = seed;
      const UepSearchResult r = find_ueps(net, eq, options);
      json doc;
      doc["found_uep"] = r.found_uep;
      doc["critical_energy"] = r.critical_energy;
      doc["starts"] = r.starts;
      doc["converged_runs"] = r.converged_runs;
      doc["ueps"] = json::array();
      for (const UepCandidate& u : r.equilibria) {
        json item;
        item["angles"] = to_vec(u.angles);
        item["relative_energy"] = u.relative_energy;
        item["kind"] = kind_name(u.kind);
        item["max_real_part"] = u.max_real_part;
        doc["ueps"].push_back(item);
      }
      emit(doc.dump(2) + "\n", out_path);
      return 0;
    }

    if (landscape_cmd->parsed()) {
      const PowerNetwork net = load_model(model_spec);
      const Equilibrium eq = solve_equilibrium(net);
      if (!eq.converged)
        throw ModelError("equilibrium solve did not converge for this model");
      const std::vector<EnergyGridPoint> pts =
          energy_landscape(net, eq, grid);
      std::string csv = "d_first,d_second,energy\n";
      for (const EnergyGridPoint& p : pts)
        csv += format_row({p.d_first, p.d_second, p.energy});
      if (csv_path.empty())
        std::cout << csv;
      else
        emit(csv, csv_path);
      return 0;
    }
  } catch (const std::exception& e) {
    json doc;
    doc["error"] = e.what();
    std::cout << doc.dump(2) << "\n";
    return 1;
  }
  return 1;
}
