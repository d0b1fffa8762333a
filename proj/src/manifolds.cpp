#include "smanifold/manifolds.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace smanifold {

double WeightedGrid::weighted_norm() const {
  double m = 0.0;
  for (int i = 0; i < size(); ++i) m = std::max(m, std::exp(weight_rate * taus[i]) * values.row(i).norm());
  return m;
}

Vec WeightedGrid::at(double tau) const {
  const int n = size();
  if (n == 0) throw InvalidState("empty grid");
  if (n == 1 || tau <= taus.front()) return node(0);
  if (tau >= taus.back()) return node(n - 1);
  int i = static_cast<int>(std::upper_bound(taus.begin(), taus.end(), tau) - taus.begin()) - 1;
  auto slope = [&](int k) -> Vec {
    if (k == 0) return (node(1) - node(0)) / (taus[1] - taus[0]);
    if (k == n - 1) return (node(n - 1) - node(n - 2)) / (taus[n - 1] - taus[n - 2]);
    return (node(k + 1) - node(k - 1)) / (taus[k + 1] - taus[k - 1]);
  };
  double h = taus[i + 1] - taus[i];
  double s = (tau - taus[i]) / h;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * node(i) + h10 * h * slope(i) + h01 * node(i + 1) + h11 * h * slope(i + 1);
}

std::vector<double> geometric_grid(double t_max, int n, double first_step) {
  if (n < 2 || !(t_max > 0)) throw InvalidState("grid needs n >= 2 and t_max > 0");
  std::vector<double> t(n);
  double h0 = std::min(first_step, t_max / (n - 1));
  // Solve h0 (q^(n-1) - 1)/(q - 1) = t_max for q >= 1 by bisection.
  auto total = [&](double q) { return std::abs(q - 1) < 1e-14 ? h0 * (n - 1) : h0 * (std::pow(q, n - 1) - 1) / (q - 1); };
  double lo = 1.0, hi = 2.0;
  while (total(hi) < t_max) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (total(mid) < t_max ? lo : hi) = mid;
  }
  double q = 0.5 * (lo + hi);
  t[0] = 0.0;
  double h = h0;
  for (int i = 1; i < n; ++i) {
    t[i] = t[i - 1] + h;
    h *= q;
  }
  t[n - 1] = t_max;
  return t;
}

namespace {

double t_max_of(const NormalForm& nf, const ContractionOptions& opts) {
  if (opts.t_max > 0) return opts.t_max;
  if (!(nf.c > 0)) throw InvalidState("decay margin c is zero: no stable directions");
  return 40.0 / nf.c;
}

Mat abar_minus(const NormalForm& nf) { return nf.G_s(Vec::Zero(nf.dim)); }

Mat jac_fd(const std::function<Vec(const Vec&)>& f, const Vec& x) {
  Mat out;
  for (int i = 0; i < x.size(); ++i) {
    double h = 6e-6 * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    Vec d = (f(xp) - f(xm)) / (2 * h);
    if (i == 0) out.resize(d.size(), x.size());
    out.col(i) = d;
  }
  return out;
}

// Picard bookkeeping shared by the two operators.
struct PicardLoop {
  const ContractionOptions& opts;
  PicardStats& stats;
  const char* what;

  // Returns true when converged.
  bool record(double diff, double scale) {
    stats.diffs.push_back(diff);
    ++stats.iterations;
    size_t k = stats.diffs.size();
    if (k >= 2) {
      double prev = stats.diffs[k - 2];
      if (prev > 1e-13 * (1.0 + scale) && diff > 1e-13 * (1.0 + scale)) {
        double r = diff / prev;
        stats.ratios.push_back(r);
        stats.max_ratio = std::max(stats.max_ratio, r);
        if (k >= 3 && r >= 1.0)
          throw NotContraction(std::string(what) + ": measured contraction ratio " + format_double(r) +
                               " >= 1 (delta too large?)");
      }
    }
    if (diff < opts.picard_tol) {
      stats.converged = true;
      return true;
    }
    if (stats.iterations >= opts.max_iter)
      throw NotContraction(std::string(what) + ": no convergence within " + std::to_string(opts.max_iter) +
                           " iterations");
    return false;
  }
};

// Convolution I_i = int_0^tau_i exp(A(tau_i - s)) g(s) ds with g cubic on each step
// (Lagrange through four neighbouring nodes), integrated exactly against the kernel.
struct Quadrature {
  std::vector<double> taus;
  std::vector<Mat> E;                 // exp(A h_i)
  std::vector<std::array<Mat, 4>> W;  // weights of the stencil nodes
  std::vector<int> first;             // stencil start

  int size() const { return static_cast<int>(taus.size()); }

  Quadrature(const Mat& A, const std::vector<double>& t) : taus(t) {
    const int n = size(), m = static_cast<int>(A.rows());
    if (n < 4) throw InvalidState("grid needs at least 4 nodes");
    E.resize(n - 1);
    W.resize(n - 1);
    first.resize(n - 1);
    Mat aug = Mat::Zero(5 * m, 5 * m);
    for (int i = 0; i + 1 < n; ++i) {
      double h = taus[i + 1] - taus[i];
      aug.topLeftCorner(m, m) = A * h;
      for (int k = 0; k < 4; ++k) aug.block(k * m, (k + 1) * m, m, m) = Mat::Identity(m, m) * h;
      Mat ex = aug.exp();
      // block (0, k+1) of ex is int_0^h exp(A(h - s)) s^k / k! ds
      E[i] = ex.topLeftCorner(m, m);
      std::array<Mat, 4> phi;  // phi[k] = int_0^h exp(A(h - s)) s^k ds
      double fact = 1.0;
      for (int k = 0; k < 4; ++k) {
        if (k) fact *= k;
        phi[k] = ex.block(0, (k + 1) * m, m, m) * fact;
      }
      int s0 = std::clamp(i - 1, 0, n - 4);
      first[i] = s0;
      Eigen::Matrix4d V;
      for (int a = 0; a < 4; ++a) {
        double sa = taus[s0 + a] - taus[i];
        for (int b = 0; b < 4; ++b) V(a, b) = std::pow(sa, b);
      }
      Eigen::Matrix4d Vi = V.inverse();
      for (int a = 0; a < 4; ++a) {
        W[i][a] = Mat::Zero(m, m);
        for (int b = 0; b < 4; ++b) W[i][a] += Vi(b, a) * phi[b];
      }
    }
  }

  Mat apply(const Mat& g) const {
    const int n = size();
    Mat I = Mat::Zero(n, g.cols());
    for (int i = 0; i + 1 < n; ++i) {
      Vec next = E[i] * I.row(i).transpose();
      for (int a = 0; a < 4; ++a) next += W[i][a] * g.row(first[i] + a).transpose();
      I.row(i + 1) = next.transpose();
    }
    return I;
  }

  // Block kernel K with I_i = sum_j K(i, j) g_j, m x m blocks.
  Mat kernel() const {
    const int n = size(), m = static_cast<int>(E[0].rows());
    Mat K = Mat::Zero(n * m, n * m);
    for (int i = 0; i + 1 < n; ++i) {
      K.block((i + 1) * m, 0, m, n * m) = E[i] * K.block(i * m, 0, m, n * m);
      for (int a = 0; a < 4; ++a) K.block((i + 1) * m, (first[i] + a) * m, m, m) += W[i][a];
    }
    return K;
  }
};

double weighted_max(const std::vector<double>& taus, const Mat& v, double w) {
  double m = 0.0;
  for (int i = 0; i < v.rows(); ++i) m = std::max(m, std::exp(w * taus[i]) * v.row(i).norm());
  return m;
}

}  // namespace

WeightedGrid center_orbit(const NormalForm& nf, const Vec& x0_0, const std::vector<double>& taus) {
  WeightedGrid g;
  g.taus = taus;
  g.weight_rate = -nf.c / 16.0;
  const int nc = nf.n_center();
  if (x0_0.size() != nc) throw DimensionMismatch("center anchor has wrong length");
  Vec zm = Vec::Zero(nf.n_minus);
  VectorFn f = [&](const Vec& x) { return nf.f_zero(zm, x); };
  OdeSolution sol = solve_ode(f, x0_0, taus.back(), 1e-12, 1e-15);
  g.values.resize(taus.size(), nc);
  for (size_t i = 0; i < taus.size(); ++i) g.values.row(i) = sol.at(taus[i]).transpose();
  return g;
}

StableComponent stable_component(const NormalForm& nf, const Vec& anchor_x0, const Vec& x_minus_0,
                                 const std::vector<double>& taus, const ContractionOptions& opts) {
  const int nm = nf.n_minus;
  if (x_minus_0.size() != nm) throw DimensionMismatch("x_minus_0 has wrong length");
  if (anchor_x0.size() != nf.n_center()) throw DimensionMismatch("anchor has wrong length");
  if (x_minus_0.norm() >= nf.delta) throw DomainViolation("|x_minus_0| must be below delta");
  StableComponent sc;
  sc.x_minus.taus = taus;
  sc.x_minus.weight_rate = nf.c / 2.0;
  const int n = static_cast<int>(taus.size());
  Vec y0 = anchor_x0;
  y0[0] = 0.0;
  Mat A = abar_minus(nf);
  Quadrature q(A, taus);
  Mat lin(n, nm);
  for (int i = 0; i < n; ++i) lin.row(i) = ((A * taus[i]).exp() * x_minus_0).transpose();
  Mat X = lin;
  PicardLoop loop{opts, sc.stats, "stable component"};
  const double w = nf.c / 2.0;
  while (true) {
    Mat g(n, nm);
    for (int i = 0; i < n; ++i) {
      Vec xi = X.row(i).transpose();
      // [A-(X-, Y0) - Abar] X- = f-(X-, Y0) - Abar X-
      g.row(i) = (nf.f_minus(xi, y0) - A * xi).transpose();
    }
    Mat Xn = lin + q.apply(g);
    double diff = weighted_max(taus, Xn - X, w);
    X = Xn;
    if (loop.record(diff, weighted_max(taus, X, w))) break;
  }
  sc.x_minus.values = X;
  double x0n = x_minus_0.norm();
  sc.k_minus = x0n > 0 ? sc.x_minus.weighted_norm() / x0n : 0.0;
  return sc;
}

PerturbationComponent perturbation_component(const NormalForm& nf, const WeightedGrid& x_minus,
                                             const WeightedGrid& x_zero, const ContractionOptions& opts) {
  const int nm = nf.n_minus, nc = nf.n_center();
  const std::vector<double>& taus = x_minus.taus;
  const int n = static_cast<int>(taus.size());
  if (x_zero.size() != n) throw DimensionMismatch("grids differ");
  PerturbationComponent pc;
  const double c = nf.c, eps = c / 16.0, a = 12.0 * eps;
  const double w = (c + a) / 4.0;
  pc.u_minus.taus = pc.u_zero.taus = taus;
  pc.u_minus.weight_rate = pc.u_zero.weight_rate = w;

  Vec x0bar = x_zero.node(0);
  Vec y0 = x0bar;
  y0[0] = 0.0;
  Vec xmbar = x_minus.node(0);

  Mat Am = abar_minus(nf);
  Quadrature q(Am, taus);
  Quadrature q0(Mat::Zero(1, 1), taus);
  // Ahat0(0,0): with the center block already straightened it is all nilpotent remainder.
  Mat Ahat0 = jac_fd([&](const Vec& x0) { return nf.f_zero(Vec::Zero(nm), x0); }, Vec::Zero(nc));
  pc.nilpotent_norm = Ahat0.norm();
  if (pc.nilpotent_norm > 1.0 / opts.M)
    throw InvalidState("center block at the origin exceeds 1/M; normal form is not straightened");

  Mat Um = Mat::Zero(n, nm), U0 = Mat::Zero(n, nc);
  Mat base_m(n, nm), base_0(n, nc);
  for (int i = 0; i < n; ++i) {
    base_m.row(i) = nf.f_minus(x_minus.node(i), y0).transpose();
    base_0.row(i) = nf.f_zero(Vec::Zero(nm), x_zero.node(i)).transpose();
  }
  PicardLoop loop{opts, pc.stats, "perturbation component"};
  while (true) {
    Mat g1(n, nm), g2(n, nc);
    for (int i = 0; i < n; ++i) {
      Vec xm = x_minus.node(i) + Um.row(i).transpose();
      Vec x0 = x_zero.node(i) + U0.row(i).transpose();
      g1.row(i) = (nf.f_minus(xm, x0) - base_m.row(i).transpose() - Am * Um.row(i).transpose()).transpose();
      g2.row(i) = (nf.f_zero(xm, x0) - base_0.row(i).transpose()).transpose();
    }
    Mat T1 = q.apply(g1);
    // Backward from the horizon; the tail beyond it follows the fitted decay of the integrand.
    Vec tail = Vec::Zero(nc);
    {
      std::vector<double> tt, vv;
      for (int i = 3 * n / 4; i < n; ++i) {
        tt.push_back(taus[i]);
        vv.push_back(g2.row(i).norm());
      }
      double last = g2.row(n - 1).norm();
      if (last > 0) {
        double rate = 0.0;
        try {
          rate = fit_decay_rate(tt, vv, 1.0, 1e-300).rate;
        } catch (const DegenerateFit&) {
          rate = 0.0;
        }
        tail = rate < 0 ? Vec(g2.row(n - 1).transpose() / (-rate)) : Vec(g2.row(n - 1).transpose() * taus.back());
      }
    }
    pc.tail_bound = tail.norm();
    if (pc.tail_bound > opts.picard_tol)
      throw TailTruncationDominates("tail bound " + format_double(pc.tail_bound) + " exceeds picard_tol");
    Mat T2(n, nc);
    Vec J = tail;
    T2.row(n - 1) = -J.transpose();
    for (int i = n - 2; i >= 0; --i) {
      for (int a = 0; a < 4; ++a) J += q0.W[i][a](0, 0) * g2.row(q0.first[i] + a).transpose();
      T2.row(i) = -J.transpose();
    }
    double diff = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i) {
      double ew = std::exp(w * taus[i]);
      diff = std::max(diff, ew * ((T1.row(i) - Um.row(i)).norm() + (T2.row(i) - U0.row(i)).norm()));
      scale = std::max(scale, ew * (T1.row(i).norm() + T2.row(i).norm()));
    }
    Um = T1;
    U0 = T2;
    if (loop.record(diff, scale)) break;
  }
  pc.u_minus.values = Um;
  pc.u_zero.values = U0;
  double nrm = 0.0;
  for (int i = 0; i < n; ++i) nrm = std::max(nrm, std::exp(w * taus[i]) * (Um.row(i).norm() + U0.row(i).norm()));
  pc.norm = nrm;
  double prod = std::abs(x0bar[0]) * xmbar.norm();
  pc.k_p = prod > 0 ? nrm / prod : 0.0;
  return pc;
}

UniformlyStablePoint uniformly_stable_point(const NormalForm& nf, const Vec& anchor_x0, const Vec& x_minus_0,
                                            const ContractionOptions& opts) {
  UniformlyStablePoint p;
  auto taus = geometric_grid(t_max_of(nf, opts), opts.n_nodes, opts.first_step);
  p.slow = center_orbit(nf, anchor_x0, taus);
  p.fast = stable_component(nf, anchor_x0, x_minus_0, taus, opts);
  p.pert = perturbation_component(nf, p.fast.x_minus, p.slow, opts);
  p.xbar = nf.pack(0.0, Vec::Zero(nf.n0), Vec::Zero(nf.n_minus));
  Vec x0 = anchor_x0 + p.pert.u_zero.node(0);
  Vec xm = x_minus_0 + p.pert.u_minus.node(0);
  p.xbar = nf.pack(x0[0], x0.tail(nf.n0), xm);
  p.u = nf.to_original(p.xbar);
  return p;
}

DecayFit fit_decay_rate(const std::vector<double>& tau, const std::vector<double>& v, double tail_fraction,
                        double floor) {
  if (tau.size() != v.size()) throw DimensionMismatch("tau and v differ in length");
  const size_t n = tau.size();
  size_t start = n - static_cast<size_t>(std::ceil(std::clamp(tail_fraction, 0.0, 1.0) * n));
  std::vector<double> x, y;
  for (size_t i = start; i < n; ++i) {
    double a = std::abs(v[i]);
    if (a > floor && a > 0 && std::isfinite(a)) {
      x.push_back(tau[i]);
      y.push_back(std::log(a));
    }
  }
  if (x.size() < 4) throw DegenerateFit("fewer than 4 usable points in the tail window");
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= x.size();
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw DegenerateFit("zero variance in tau");
  DecayFit f;
  f.rate = sxy / sxx;
  f.constant = std::exp(my - f.rate * mx);
  f.points = static_cast<int>(x.size());
  return f;
}

OrbitDecomposition decompose_orbit(const NormalForm& nf, const Trajectory& traj, const ContractionOptions& opts) {
  if (traj.param != Param::tau) throw InvalidState("decompose_orbit needs a tau-trajectory");
  const int N = nf.dim, nm = nf.n_minus, nc = nf.n_center();
  double horizon = std::min(t_max_of(nf, opts), traj.back_time());
  auto taus = geometric_grid(horizon, opts.n_nodes, opts.first_step);
  const int n = static_cast<int>(taus.size());
  OrbitDecomposition d;
  d.taus = taus;
  d.c = nf.c;
  d.orbit.resize(n, N);
  for (int i = 0; i < n; ++i) d.orbit.row(i) = nf.from_original(traj.at(taus[i])).transpose();
  Vec xb0 = d.orbit.row(0).transpose();
  Vec xm = xb0.tail(nm);
  Vec x0 = xb0.head(nc);
  d.slow = Mat::Zero(n, N);
  d.fast = Mat::Zero(n, N);
  d.pert = Mat::Zero(n, N);
  d.u_minus0 = xm.norm();

  if (xm.norm() <= 1e-12 * (1.0 + xb0.norm())) {
    WeightedGrid s = center_orbit(nf, x0, taus);
    d.slow.leftCols(nc) = s.values;
    d.slow_only = true;
    d.fast_rate_ok = d.pert_rate_ok = true;
    d.zeta_sl0 = x0[0];
    d.zeta_infinity = s.values(n - 1, 0);
  } else {
    // Anchor: X0_ = x0(0) - U0(0), solved by fixed-point iteration.
    Vec anchor = x0;
    WeightedGrid slow;
    StableComponent fast;
    PerturbationComponent pert;
    for (int it = 0; it < 50; ++it) {
      slow = center_orbit(nf, anchor, taus);
      fast = stable_component(nf, anchor, xm, taus, opts);
      pert = perturbation_component(nf, fast.x_minus, slow, opts);
      Vec next = x0 - pert.u_zero.node(0);
      double ch = (next - anchor).norm();
      anchor = next;
      if (ch <= 1e-15 * (1.0 + anchor.norm())) break;
    }
    slow = center_orbit(nf, anchor, taus);
    fast = stable_component(nf, anchor, xm, taus, opts);
    pert = perturbation_component(nf, fast.x_minus, slow, opts);
    d.slow.leftCols(nc) = slow.values;
    d.fast.rightCols(nm) = fast.x_minus.values;
    d.pert.leftCols(nc) = pert.u_zero.values;
    d.pert.rightCols(nm) = pert.u_minus.values;
    d.k_minus = fast.k_minus;
    d.k_p = pert.k_p;
    d.stable_stats = fast.stats;
    d.pert_stats = pert.stats;
    d.zeta_sl0 = anchor[0];
    d.zeta_infinity = slow.values(n - 1, 0) + pert.u_zero.values(n - 1, 0);

    std::vector<double> fv(n), pv(n);
    double scale = d.orbit.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      fv[i] = d.fast.row(i).norm();
      pv[i] = d.pert.row(i).norm();
    }
    double floor = 1e-14 * std::max(scale, 1e-300);
    d.fast_fit = fit_decay_rate(taus, fv, 0.5, floor);
    try {
      d.pert_fit = fit_decay_rate(taus, pv, 0.5, floor);
    } catch (const DegenerateFit&) {
      d.pert_fit.rate = -INFINITY;  // vanished below the floor
    }
    double tol = 0.1 * nf.c;
    d.fast_rate_ok = d.fast_fit.rate <= -nf.c / 2 + tol;
    d.pert_rate_ok = d.pert_fit.rate <= -nf.c / 4 + tol;
    if (!(d.fast_fit.rate < 0)) throw NoDecay("fast component does not decay");
  }
  d.pert0 = d.pert.row(0).norm();
  double scale = 0.0, err = 0.0;
  for (int i = 0; i < n; ++i) {
    scale = std::max(scale, d.orbit.row(i).norm());
    err = std::max(err, (d.slow.row(i) + d.fast.row(i) + d.pert.row(i) - d.orbit.row(i)).norm());
  }
  d.model_error = err;
  d.reconstruction_error = scale > 0 ? err / scale : err;
  return d;
}

OrbitDecomposition decompose_from(const NormalForm& nf, const Vec& u0, const ContractionOptions& opts) {
  IntegrateOptions io;
  io.rtol = 1e-12;
  io.atol = 1e-15;
  io.probe_blowup = false;
  Trajectory tr = integrate_tau(nf.sys, u0, t_max_of(nf, opts), io);
  if (tr.back_time() < 0.5 * t_max_of(nf, opts)) throw NoDecay("orbit stopped early: " + (tr.events.empty() ? std::string("?") : tr.events.back().kind));
  return decompose_orbit(nf, tr, opts);
}

Mat fixed_point_derivative(const Mat& Tx, const Mat& Ty, const Vec& weights) {
  if (Tx.rows() != Tx.cols() || Tx.rows() != Ty.rows()) throw DimensionMismatch("fixed_point_derivative shapes");
  Mat wt = Tx;
  if (weights.size()) {
    if (weights.size() != Tx.rows()) throw DimensionMismatch("weights length");
    wt = weights.asDiagonal() * Tx * weights.cwiseInverse().asDiagonal();
  }
  double nrm = wt.cwiseAbs().rowwise().sum().maxCoeff();
  if (nrm >= 1.0) throw NotContraction("operator norm of Tx is " + format_double(nrm) + " >= 1");
  auto wnorm = [&](const Mat& m) {
    if (!weights.size()) return m.cwiseAbs().maxCoeff();
    return (weights.asDiagonal() * m).cwiseAbs().maxCoeff();
  };
  Mat sum = Ty, term = Ty;
  for (int k = 0; k < 100000; ++k) {
    term = Tx * term;
    sum += term;
    if (wnorm(term) < 1e-12) break;
  }
  return sum;
}

Mat stable_sensitivity(const NormalForm& nf, const Vec& anchor_x0, const Vec& x_minus_0,
                       const std::vector<double>& taus, const ContractionOptions& opts) {
  const int nm = nf.n_minus;
  const int n = static_cast<int>(taus.size());
  StableComponent sc = stable_component(nf, anchor_x0, x_minus_0, taus, opts);
  Vec y0 = anchor_x0;
  y0[0] = 0.0;
  Mat A = abar_minus(nf);
  std::vector<Mat> dA(n);
  for (int j = 0; j < n; ++j)
    dA[j] = jac_fd([&](const Vec& xm) { return nf.f_minus(xm, y0); }, sc.x_minus.node(j)) - A;
  Mat Tx = Quadrature(A, taus).kernel();
  for (int j = 0; j < n; ++j) Tx.middleCols(j * nm, nm) = Tx.middleCols(j * nm, nm) * dA[j];
  Mat Ty(n * nm, nm);
  for (int i = 0; i < n; ++i) Ty.block(i * nm, 0, nm, nm) = (A * taus[i]).exp();
  Vec w(n * nm);
  for (int i = 0; i < n; ++i) w.segment(i * nm, nm).setConstant(std::exp(nf.c / 2 * taus[i]));
  return fixed_point_derivative(Tx, Ty, w);
}

std::string manifold_samples_csv(const NormalForm& nf, int n_per_axis, double radius, const ContractionOptions& opts) {
  std::ostringstream os;
  const int nm = nf.n_minus, N = nf.dim;
  os << "p_zeta";
  for (int i = 1; i <= nm; ++i) os << ",p_m" << i;
  for (int i = 1; i <= N; ++i) os << ",u" << i;
  os << "\n";
  n_per_axis = std::max(n_per_axis, 2);
  for (int a = 0; a < n_per_axis; ++a) {
    double z = radius * a / (n_per_axis - 1);
    for (int k = 0; k < nm; ++k) {
      for (int b = 0; b < n_per_axis; ++b) {
        Vec xm = Vec::Zero(nm);
        xm[k] = radius * (2.0 * b / (n_per_axis - 1) - 1.0);
        Vec anchor = Vec::Zero(nf.n_center());
        anchor[0] = z;
        UniformlyStablePoint p = uniformly_stable_point(nf, anchor, xm, opts);
        os << format_double(z);
        for (int i = 0; i < nm; ++i) os << "," << format_double(xm[i]);
        for (int i = 0; i < N; ++i) os << "," << format_double(p.u[i]);
        os << "\n";
      }
    }
  }
  return os.str();
}

std::string decomposition_csv(const OrbitDecomposition& d) {
  std::ostringstream os;
  const int N = static_cast<int>(d.orbit.cols());
  os << "tau";
  for (const char* part : {"slow", "fast", "pert"})
    for (int i = 1; i <= N; ++i) os << "," << part << i;
  os << ",rate_fast,rate_pert\n";
  for (size_t k = 0; k < d.taus.size(); ++k) {
    os << format_double(d.taus[k]);
    for (const Mat* m : {&d.slow, &d.fast, &d.pert})
      for (int i = 0; i < N; ++i) os << "," << format_double((*m)(k, i));
    os << "," << format_double(d.fast_fit.rate) << "," << format_double(d.pert_fit.rate) << "\n";
  }
  return os.str();
}

}  // namespace smanifold
