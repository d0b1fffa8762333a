#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smanifold/core.hpp"
#include "smanifold/graph.hpp"
#include "smanifold/integrate.hpp"

namespace smanifold {

// x = transform * U puts the zero block first, then the minus block.
// Within the zero block A = Abar + N with exp(Abar t) norm preserving and |N| <= 1/M.
struct SplitCoordinates {
  Mat transform;
  Mat inverse;
  int n_zero = 0;
  int n_minus = 0;
  Mat A;           // transform * m * inverse
  Mat A_zero_bar;
  Mat N_zero;
  Mat A_minus;
  double eta = 1.0;
  double nilpotent_norm = 0.0;
};

SplitCoordinates linear_normalize(const Mat& m, const SpectralSplit& split, double M = 1e3);
SplitCoordinates linear_normalize(const SingularSystem& sys, double M = 1e3);

// Graph y = h(x) of a center manifold over the center eigenspace: U = Bc x + Bm h(x).
struct CenterGraph {
  int n_center = 0;
  int n_minus = 0;
  Mat basis_center;
  Mat basis_minus;
  Mat to_split;  // [x; y] = to_split * U
  PolyGraph h;
  double radius = 0.0;
  double residual = 0.0;  // max invariance residual on the fit ball
  double cond = 1.0;
  bool resonance_warning = false;

  Vec point(const Vec& x) const;
};

// radius <= 0 picks delta/4 (delta = cutoff or 0.1).
CenterGraph center_graph(const SingularSystem& sys, int order = 3, double radius = -1.0);

// One explicit shear x -> x + e_fiber g(x_base); the base may overlap the fiber.
struct ShearStage {
  std::string name;
  std::vector<int> base;
  std::vector<int> fiber;
  PolyGraph g;
  double residual = 0.0;

  Vec apply(const Vec& x) const;
  Mat jac(const Vec& x) const;
};

struct NormalFormOptions {
  int order = 3;
  int max_order = 7;
  double delta = 0.0;        // <= 0 uses the cutoff, else 0.1
  double fit_tol = 1e-11;    // relative invariance residual that stops order escalation
  double reassembly_tol = 1e-5;
  bool waive_slow = false;   // keep d zeta/d tau = zeta g1 without the second zeta factor
  std::uint64_t seed = 7;
};

// Coordinates xbar = (zeta, u0, u_minus) with U = Psi(xbar).
class NormalForm {
 public:
  SingularSystem sys;
  int dim = 0;
  int n0 = 0;
  int n_minus = 0;
  double delta = 0.1;
  double c = 0.0;
  bool waive_slow = false;
  int order_used = 0;
  Mat P;                       // linear stage: U = P x
  std::vector<ShearStage> stages;  // applied last-to-first
  double reassembly_error = 0.0;

  Vec to_original(const Vec& xbar) const;
  Vec from_original(const Vec& u) const;
  Mat dpsi(const Vec& xbar) const;
  Vec field(const Vec& xbar) const;

  int i_zeta() const { return 0; }
  Vec u0(const Vec& xbar) const { return xbar.segment(1, n0); }
  Vec um(const Vec& xbar) const { return xbar.tail(n_minus); }
  Vec pack(double zeta, const Vec& u0v, const Vec& umv) const;

  // Block factors.
  Mat G_s(const Vec& xbar) const;         // n- x n-
  Mat G_c(const Vec& xbar) const;         // n0 x n0, integral of D_{u0} F0
  Mat G_0minus(const Vec& xbar) const;    // n0 x n0
  Mat G_01(double zeta, const Vec& u0v) const;
  Vec G_10(double zeta, const Vec& u0v) const;      // row, length n0
  Vec G_1minus(const Vec& xbar) const;              // row, length n-
  Vec reassemble(const Vec& xbar) const;

  // Relative sup error of reassemble against field on samples of the delta/2 ball.
  double measure_reassembly(int n_samples, std::uint64_t seed) const;

  // Center part X0 = (zeta, u0) and minus part X- = u_minus.
  // f_zero drops the zeta = 0 trace of the center rows, which the exact normal form does not have;
  // what it removes is the fit residual of the singular fibers.
  int n_center() const { return 1 + n0; }
  Vec f_minus(const Vec& xm, const Vec& x0) const;
  Vec f_zero(const Vec& xm, const Vec& x0) const;
};

// Throws FactorizationResidual when the reassembled field misses by more than reassembly_tol.
NormalForm normal_form(const SingularSystem& sys, const NormalFormOptions& opts = {});

// Slow flow on u_minus = 0 in the variable t: (zeta, u0) -> (dzeta/dt, du0/dt).
struct ReducedSystem {
  int dim = 0;
  VectorFn rhs;
};
ReducedSystem slow_reduce(const NormalForm& nf);

struct WeightedGrid {
  std::vector<double> taus;
  Mat values;  // node x component
  double weight_rate = 0.0;

  int size() const { return static_cast<int>(taus.size()); }
  int dim() const { return static_cast<int>(values.cols()); }
  Vec node(int i) const { return values.row(i).transpose(); }
  double weighted_norm() const;
  // Piecewise cubic Hermite with finite-difference slopes; exact at nodes.
  Vec at(double tau) const;
};

// n nodes on [0, t_max] with steps growing geometrically from first_step.
std::vector<double> geometric_grid(double t_max, int n, double first_step);

struct PicardStats {
  int iterations = 0;
  std::vector<double> diffs;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  bool converged = false;
};

struct ContractionOptions {
  double picard_tol = 1e-10;
  int max_iter = 200;
  double ratio_bound = 0.95;
  int n_nodes = 400;
  double first_step = 0.01;
  double t_max = 0.0;  // 0 selects 40 / c
  double M = 1e3;
};

struct StableComponent {
  WeightedGrid x_minus;  // weight c/2
  PicardStats stats;
  double k_minus = 0.0;
};

StableComponent stable_component(const NormalForm& nf, const Vec& anchor_x0, const Vec& x_minus_0,
                                 const std::vector<double>& taus, const ContractionOptions& opts = {});

// Orbit of the center dynamics dX0/dtau = f0(0, X0) sampled on the grid (weight -eps).
WeightedGrid center_orbit(const NormalForm& nf, const Vec& x0_0, const std::vector<double>& taus);

struct PerturbationComponent {
  WeightedGrid u_minus;
  WeightedGrid u_zero;
  PicardStats stats;
  double norm = 0.0;        // weighted by (c + a)/4
  double k_p = 0.0;         // norm / (|zeta_| |X-_|), 0 when the product vanishes
  double tail_bound = 0.0;
  double nilpotent_norm = 0.0;
};

PerturbationComponent perturbation_component(const NormalForm& nf, const WeightedGrid& x_minus,
                                             const WeightedGrid& x_zero, const ContractionOptions& opts = {});

struct UniformlyStablePoint {
  Vec xbar;
  Vec u;
  WeightedGrid slow;
  StableComponent fast;
  PerturbationComponent pert;
};

UniformlyStablePoint uniformly_stable_point(const NormalForm& nf, const Vec& anchor_x0, const Vec& x_minus_0,
                                            const ContractionOptions& opts = {});

struct DecayFit {
  double rate = 0.0;
  double constant = 0.0;
  int points = 0;
};
// Least squares of log|v| on the last tail_fraction of the samples, skipping |v| <= floor.
// Throws DegenerateFit on fewer than 4 usable points or zero variance.
DecayFit fit_decay_rate(const std::vector<double>& tau, const std::vector<double>& v, double tail_fraction = 0.5,
                        double floor = 0.0);

struct OrbitDecomposition {
  std::vector<double> taus;
  Mat orbit;  // node x N, normal-form coordinates
  Mat slow;
  Mat fast;
  Mat pert;
  DecayFit fast_fit;
  DecayFit pert_fit;
  double c = 0.0;
  double k_minus = 0.0;
  double k_p = 0.0;
  double zeta_sl0 = 0.0;
  double u_minus0 = 0.0;
  double pert0 = 0.0;
  double zeta_infinity = 0.0;
  double reconstruction_error = 0.0;  // relative, max over nodes
  double model_error = 0.0;           // |pert - U^p| over nodes
  bool slow_only = false;
  bool fast_rate_ok = false;
  bool pert_rate_ok = false;
  PicardStats stable_stats;
  PicardStats pert_stats;
};

// traj is a tau-trajectory in original coordinates reaching the grid horizon.
OrbitDecomposition decompose_orbit(const NormalForm& nf, const Trajectory& traj, const ContractionOptions& opts = {});
// Integrates from u0 and decomposes.
OrbitDecomposition decompose_from(const NormalForm& nf, const Vec& u0, const ContractionOptions& opts = {});

// (I - Tx)^{-1} Ty by Neumann series. Throws NotContraction when |Tx| >= 1 in the weighted sup norm.
// weights[i] multiplies component i of the stacked vector; empty means unweighted.
Mat fixed_point_derivative(const Mat& Tx, const Mat& Ty, const Vec& weights = Vec());

// d X-(grid) / d X-_ of the stable component (stacked node-major), via fixed_point_derivative.
Mat stable_sensitivity(const NormalForm& nf, const Vec& anchor_x0, const Vec& x_minus_0,
                       const std::vector<double>& taus, const ContractionOptions& opts = {});

// Samples of the uniformly stable parameterization (anchor on E, x_minus) as CSV.
std::string manifold_samples_csv(const NormalForm& nf, int n_per_axis, double radius, const ContractionOptions& opts);
std::string decomposition_csv(const OrbitDecomposition& d);

}  // namespace smanifold
