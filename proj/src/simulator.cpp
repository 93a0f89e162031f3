#include "gridcert/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gridcert {
namespace {

constexpr double kDivergedEdgeAngle = 10.0 * std::numbers::pi;
constexpr double kMinStep = 1e-14;

// Dormand-Prince 5(4) tableau with FSAL.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33,
                 kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                 kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kE1 = kB1 - 5179.0 / 57600, kE3 = kB3 - 7571.0 / 16695,
                 kE4 = kB4 - 393.0 / 640, kE5 = kB5 + 92097.0 / 339200,
                 kE6 = kB6 - 187.0 / 2100, kE7 = -1.0 / 40;

bool diverged(const StateSpaceModel& sys, const Eigen::VectorXd& x) {
  return sys.edge_angles(x).cwiseAbs().maxCoeff() > kDivergedEdgeAngle;
}

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y_old,
                  const Eigen::VectorXd& y_new, double abs_tol,
                  double rel_tol) {
  double acc = 0.0;
  for (int i = 0; i < err.size(); ++i) {
    const double scale =
        abs_tol + rel_tol * std::max(std::abs(y_old(i)), std::abs(y_new(i)));
    const double q = err(i) / scale;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace

double settle_metric(const StateSpaceModel& sys, const Eigen::VectorXd& x) {
  const double edge_dev = (sys.c_mat * x).cwiseAbs().maxCoeff();
  const double vel = x.tail(sys.n).cwiseAbs().maxCoeff();
  return std::max(edge_dev, vel);
}

Trajectory integrate(const StateSpaceModel& sys, const Eigen::VectorXd& x0,
                     const IntegrateOptions& options) {
  Trajectory traj;
  Eigen::VectorXd y = x0;
  double t = 0.0;
  double settled_since = -1.0;

  auto record = [&](double time, const Eigen::VectorXd& state) {
    traj.times.push_back(time);
    if (options.store_states) traj.states.push_back(state);
  };
  auto check_events = [&](double time, const Eigen::VectorXd& state) {
    if (diverged(sys, state)) {
      traj.status = SimStatus::diverged;
      return true;
    }
    if (settle_metric(sys, state) < options.settle_tol) {
      if (settled_since < 0) settled_since = time;
      if (time - settled_since >= options.settle_window) {
        traj.status = SimStatus::converged;
        return true;
      }
    } else {
      settled_since = -1.0;
    }
    return false;
  };

  record(t, y);
  bool done = check_events(t, y);

  if (options.fixed_step) {
    while (!done && t < options.horizon &&
           traj.accepted < options.max_steps) {
      const double h = std::min(options.fixed_dt, options.horizon - t);
      const Eigen::VectorXd k1 = sys.rhs(y);
      const Eigen::VectorXd k2 = sys.rhs(y + 0.5 * h * k1);
      const Eigen::VectorXd k3 = sys.rhs(y + 0.5 * h * k2);
      const Eigen::VectorXd k4 = sys.rhs(y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
      ++traj.accepted;
      record(t, y);
      done = check_events(t, y);
      if (!y.allFinite()) {
        traj.status = SimStatus::step_failure;
        done = true;
      }
    }
  } else {
    Eigen::VectorXd k1 = sys.rhs(y);
    double h = 1e-3;
    {
      const double fn = k1.cwiseAbs().maxCoeff();
      if (fn > 1e-12) h = std::clamp(0.01 / fn, 1e-6, 0.1);
    }
    long steps = 0;
    while (!done && t < options.horizon && steps < options.max_steps) {
      ++steps;
      h = std::min(h, options.horizon - t);
      if (h < kMinStep) {
        traj.status = SimStatus::step_failure;
        break;
      }
      const Eigen::VectorXd k2 = sys.rhs(y + h * (kA21 * k1));
      const Eigen::VectorXd k3 = sys.rhs(y + h * (kA31 * k1 + kA32 * k2));
      const Eigen::VectorXd k4 =
          sys.rhs(y + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
      const Eigen::VectorXd k5 =
          sys.rhs(y + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
      const Eigen::VectorXd k6 = sys.rhs(
          y + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
      const Eigen::VectorXd y_new =
          y + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
      const Eigen::VectorXd k7 = sys.rhs(y_new);
      const Eigen::VectorXd err =
          h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);
      const double en =
          error_norm(err, y, y_new, options.abs_tol, options.rel_tol);
      if (!y_new.allFinite() || !std::isfinite(en)) {
        h *= 0.25;
        ++traj.rejected;
        continue;
      }
      if (en <= 1.0) {
        t += h;
        y = y_new;
        k1 = k7;  // FSAL
        ++traj.accepted;
        record(t, y);
        done = check_events(t, y);
      } else {
        ++traj.rejected;
      }
      const double factor =
          (en <= 1e-30) ? 5.0
                        : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h *= factor;
    }
    if (!done && steps >= options.max_steps && t < options.horizon)
      traj.status = SimStatus::step_failure;
  }

  traj.final_state = y;
  traj.end_time = t;
  return traj;
}

bool converged_to(const StateSpaceModel& sys, const Trajectory& traj,
                  double tol) {
  return traj.status == SimStatus::converged &&
         settle_metric(sys, traj.final_state) <= tol;
}

MonitorReport monitor_along(
    const StateSpaceModel& sys, const Trajectory& traj,
    const std::function<double(const Eigen::VectorXd&)>& value) {
  MonitorReport report;
  report.values.reserve(traj.states.size());
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    report.values.push_back(value(traj.states[i]));
    if (report.first_outside_polytope < 0 &&
        !sys.in_polytope(traj.states[i])) {
      report.first_outside_polytope = static_cast<int>(i);
    }
    if (i > 0) {
      report.max_increase =
          std::max(report.max_increase,
                   report.values[i] - report.values[i - 1]);
    }
  }
  return report;
}

}  // namespace gridcert
