#pragma once

#include <string>
#include <vector>

#include "smanifold/core.hpp"

namespace smanifold {

struct Trajectory;

// zeta = u1 throughout.
SingularSystem make_example_fast();   // F = (-u2, -u1 u2)
SingularSystem make_example_ok();     // F = (-u1 u2, -u2)
SingularSystem make_example_slow();   // F = (-u1 u3, -u2, -u1 u3)
SingularSystem make_remark_slow();    // dU/dt = (-u2, u2^2 (1-u2), -u3/u1)

// dV/dt = A_s V / zeta + A_ns V.
struct ToyLinearModel {
  Mat A_s;
  Mat A_ns;
  int d() const { return static_cast<int>(A_s.rows()); }
};

// A_s = diag(-1, 0), A_ns = [[0, 1], [1, -1]].
ToyLinearModel default_toy_model();
// Constant zeta = zeta0; the origin is not singular here.
SingularSystem make_toy_fixed(const ToyLinearModel& m, double zeta0);
// zeta promoted to the state: U = (zeta, V), dzeta/dtau = 0, zeta(U) = u1.
SingularSystem make_toy_system(const ToyLinearModel& m);

struct ToySubspaces {
  double zeta = 0.0;
  Mat M_minus;
  Mat M_zero;
  Mat M_zero_minus;
  Mat M_s;
  Eigen::VectorXcd eig_minus;
  Eigen::VectorXcd eig_zero;
  Eigen::VectorXcd reduced_eigs;  // eigenvalues of L0 A_ns R0
};

// Throws GroupCollision when the zeta=0 eigenvalue groups can no longer be told apart.
ToySubspaces toy_track_subspaces(const ToyLinearModel& m, double zeta);

struct ToyDecay {
  double rate_t = 0.0;
  double rate_tau = 0.0;
  bool consistent = false;  // |rate_t * zeta / rate_tau - 1| < 0.05
};

ToyDecay toy_decay_check(const ToyLinearModel& m, double zeta, const Vec& v0);

// Largest principal angle between the column spaces of a and b.
double principal_angle(const Mat& a, const Mat& b);
// Columns spanning the real invariant subspace of a for the listed eigenvalues.
Mat invariant_subspace(const Mat& a, const std::vector<std::complex<double>>& eigs);

// Compressible Navier-Stokes viscous profiles, steady (sigma = 0) or travelling.
// State is the deviation from (rho_bar, sigma, theta_bar, 0, 0):
//   u = (rho - rho_bar, v - sigma, theta - theta_bar, v_x, theta_x), zeta = u2.
struct NSParams {
  double R = 1.0;
  double gamma = 1.4;
  double nu = 1.0;
  double k = 1.0;
  double sigma = 0.0;
  double rho_bar = 1.0;
  double theta_bar = 1.0;
};

SingularSystem make_navier_stokes(const NSParams& p = {});
// (A22 * zeta) after the w-substitution, at a deviation state u.
Mat ns_a22_times_v(const NSParams& p, const Vec& u);
// b^{-1} (A21 A21^T / a11 + Theta) at the equilibrium; the negated stable block of DF(0).
Mat ns_stable_block(const NSParams& p);

// Builtins: example-fast, example-ok, example-slow, remark-slow, toy, ns.
SingularSystem builtin_system(const std::string& name);
std::vector<std::string> builtin_names();
bool is_builtin(const std::string& name);

// u1(t)^2 = u1(0)^2 + 2 u2(0) (e^{-t} - 1), u2(t) = u2(0) e^{-t}.
Vec oracle_fast(const Vec& u0, double t);
// First t with u1 = 0, +inf if never.
double fast_singular_time(const Vec& u0);
// max_t |u1(t) - u1(0) exp(u2(t) - u2(0))| over the nodes of a t-trajectory of example-ok.
double oracle_ok_relation(const Trajectory& traj);
// u3(0) = A u1(0); returns (u1, u2, u3) at t.
Vec oracle_slow(double u1_0, double A, double B, double t);
// ln(A / (A - 1)); +inf when A <= 1.
double slow_blowup_time(double A);

}  // namespace smanifold
