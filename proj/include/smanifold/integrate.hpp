#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smanifold/core.hpp"

namespace smanifold {

enum class Param { t, tau };
const char* param_name(Param p);

// kind: zeta_zero | derivative_blowup | left_ball | converged | step_underflow
struct Event {
  std::string kind;
  double time = 0.0;
  Vec state;
  double detail = 0.0;  // |dU/dt| at the event
};

struct Trajectory {
  Param param = Param::tau;
  int dim = 0;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> derivs;     // d state / d param; empty after CSV import
  std::vector<double> zetas;
  std::vector<double> other;   // t along a tau-trajectory and vice versa; may be empty
  std::vector<Event> events;

  size_t size() const { return times.size(); }
  double front_time() const { return times.front(); }
  double back_time() const { return times.back(); }
  // Cubic Hermite on the bracketing step (linear when derivatives are absent).
  Vec at(double s) const;
  const Event* find_event(const std::string& kind) const;
};

struct IntegrateOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double blowup_threshold = 1e8;
  double loc_tol = 1e-12;
  double h_init = 0.0;         // 0 selects automatically
  long max_steps = 2000000;
  std::optional<double> ball_radius;
  double converged_tol = 1e-14;  // |F(u0)| <= tol (1 + |u0|) counts as an equilibrium start
  bool probe_blowup = true;      // look for derivative blow-up past a terminal zeta_zero
};

// dU/dtau = F(U); t(tau) is carried along.
Trajectory integrate_tau(const SingularSystem& sys, const Vec& u0, double tau_end, const IntegrateOptions& opts = {});
// dU/dt = phi_s/zeta + phi_ns, integrated in the desingularized form and reported in t.
Trajectory integrate_t(const SingularSystem& sys, const Vec& u0, double t_end, const IntegrateOptions& opts = {});

// Plain adaptive Dormand-Prince integration of dy/ds = f(y) on [0, s_end].
struct OdeSolution {
  std::vector<double> s;
  std::vector<Vec> y;
  std::vector<Vec> dy;
  bool underflow = false;
  Vec at(double s) const;
};
OdeSolution solve_ode(const VectorFn& f, const Vec& y0, double s_end, double rtol = 1e-10, double atol = 1e-12,
                      long max_steps = 2000000);

enum class DiffeoVerdict { diffeo, not_diffeo, inconclusive };
const char* verdict_name(DiffeoVerdict v);

struct RescaleMap {
  std::vector<double> tau;
  std::vector<double> t;
  bool diverges = false;
  DiffeoVerdict verdict = DiffeoVerdict::inconclusive;
  double t_at(double tau_value) const;
};

RescaleMap rescale(const Trajectory& traj_tau, const SingularSystem& sys);
DiffeoVerdict check_time_diffeo(const Trajectory& traj_tau, const SingularSystem& sys, double horizon);
// Same classification on raw samples of zeta(tau).
DiffeoVerdict classify_zeta_tail(const std::vector<double>& tau, const std::vector<double>& zeta, double horizon);
// Throws NotMonotone if t(tau) is not strictly increasing.
Trajectory pullback(const Trajectory& traj_tau, const RescaleMap& map);

std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(const std::string& text);
std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const std::string& text);

std::string format_double(double x);

}  // namespace smanifold
