#include "smanifold/examples.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "smanifold/integrate.hpp"
#include "smanifold/system_io.hpp"

namespace smanifold {

namespace {

std::string num(double x) {
  std::string s = format_double(x);
  return x < 0 ? "(" + s + ")" : s;
}

SingularSystem named(SingularSystem s, std::vector<std::string> labels) {
  s.labels = std::move(labels);
  return s;
}

}  // namespace

SingularSystem make_example_fast() {
  return named(system_from_source({"u1", {"-u2", "0"}, {"0", "-u2"}}, 2, "example-fast"), {"u1", "u2"});
}

SingularSystem make_example_ok() {
  return named(system_from_source({"u1", {"0", "-u2"}, {"-u2", "0"}}, 2, "example-ok"), {"u1", "u2"});
}

SingularSystem make_example_slow() {
  return named(system_from_source({"u1", {"0", "-u2", "0"}, {"-u3", "0", "-u3"}}, 3, "example-slow"),
               {"u1", "u2", "u3"});
}

SingularSystem make_remark_slow() {
  return named(system_from_source({"u1", {"0", "0", "-u3"}, {"-u2", "u2^2*(1-u2)", "0"}}, 3, "remark-slow"),
               {"u1", "u2", "u3"});
}

ToyLinearModel default_toy_model() {
  ToyLinearModel m;
  m.A_s = Mat::Zero(2, 2);
  m.A_s(0, 0) = -1.0;
  m.A_ns.resize(2, 2);
  m.A_ns << 0.0, 1.0, 1.0, -1.0;
  return m;
}

namespace {

// Row i of A applied to variables u{offset+1}..u{offset+d}.
std::string linear_row(const Mat& A, int i, int offset) {
  std::string s;
  for (int j = 0; j < A.cols(); ++j) {
    double a = A(i, j);
    if (a == 0.0) continue;
    if (!s.empty()) s += "+";
    s += num(a) + "*u" + std::to_string(offset + j + 1);
  }
  return s.empty() ? "0" : s;
}

}  // namespace

SingularSystem make_toy_fixed(const ToyLinearModel& m, double zeta0) {
  int d = m.d();
  SystemSource src;
  src.zeta = num(zeta0);
  for (int i = 0; i < d; ++i) {
    src.phi_s.push_back(linear_row(m.A_s, i, 0));
    src.phi_ns.push_back(linear_row(m.A_ns, i, 0));
  }
  SingularSystem s = system_from_source(src, d, "toy-fixed");
  s.labels.clear();
  for (int i = 0; i < d; ++i) s.labels.push_back("v" + std::to_string(i + 1));
  return s;
}

SingularSystem make_toy_system(const ToyLinearModel& m) {
  int d = m.d();
  SystemSource src;
  src.zeta = "u1";
  src.phi_s.push_back("0");
  src.phi_ns.push_back("0");
  for (int i = 0; i < d; ++i) {
    src.phi_s.push_back(linear_row(m.A_s, i, 1));
    src.phi_ns.push_back(linear_row(m.A_ns, i, 1));
  }
  SingularSystem s = system_from_source(src, d + 1, "toy");
  s.labels = {"zeta"};
  for (int i = 0; i < d; ++i) s.labels.push_back("v" + std::to_string(i + 1));
  return s;
}

Mat invariant_subspace(const Mat& a, const std::vector<std::complex<double>>& eigs) {
  const Eigen::Index n = a.rows();
  if (eigs.empty()) return Mat(n, 0);
  if (static_cast<Eigen::Index>(eigs.size()) >= n) return Mat::Identity(n, n);
  double scale = 1.0;
  for (const auto& e : eigs) scale = std::max(scale, std::abs(e));
  scale = std::max(scale, a.norm());
  Mat B = a / scale;
  Mat I = Mat::Identity(n, n);
  Mat P = I;
  int k = 0;
  for (const auto& e : eigs) {
    std::complex<double> mu = e / scale;
    if (std::abs(mu.imag()) < 1e-12) {
      P = P * (B - mu.real() * I);
      ++k;
    } else if (mu.imag() > 0) {
      P = P * (B * B - 2.0 * mu.real() * B + std::norm(mu) * I);
      k += 2;
    }
  }
  P /= std::max(P.norm(), 1e-300);
  Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(k);
}

double principal_angle(const Mat& a, const Mat& b) {
  if (a.cols() == 0 || b.cols() == 0) return 0.0;
  Eigen::HouseholderQR<Mat> qa(a), qb(b);
  Mat Qa = qa.householderQ() * Mat::Identity(a.rows(), a.cols());
  Mat Qb = qb.householderQ() * Mat::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Mat> svd(Qa.transpose() * Qb);
  double smin = svd.singularValues().minCoeff();
  if (a.cols() != b.cols()) smin = svd.singularValues()(svd.singularValues().size() - 1);
  return std::acos(std::clamp(smin, -1.0, 1.0));
}

ToySubspaces toy_track_subspaces(const ToyLinearModel& m, double zeta) {
  const int d = m.d();
  SpectralSplit s0 = spectral_split(m.A_s);
  if (s0.n_plus != 0) throw Error("A_s has eigenvalues with positive real part");
  Mat A = m.A_s + zeta * m.A_ns;
  Eigen::EigenSolver<Mat> es(A, false);
  if (es.info() != Eigen::Success) throw EigenFailure("eigensolver did not converge");
  Eigen::VectorXcd ev = es.eigenvalues();

  // The n0 eigenvalues nearest 0 continue the zero group.
  std::vector<int> idx(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int x, int y) { return std::abs(ev[x]) < std::abs(ev[y]); });
  std::vector<std::complex<double>> zero, minus;
  for (int i = 0; i < d; ++i) (i < s0.n_zero ? zero : minus).push_back(ev[idx[i]]);
  if (!zero.empty() && !minus.empty()) {
    double zmax = 0.0, mmin = std::numeric_limits<double>::infinity();
    for (auto& z : zero) zmax = std::max(zmax, std::abs(z));
    for (auto& x : minus) mmin = std::min(mmin, std::abs(x));
    double gap0 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < s0.eigenvalues.size(); ++i)
      if (s0.eigenvalues[i].real() < -s0.tol_spectral) gap0 = std::min(gap0, std::abs(s0.eigenvalues[i]));
    if (zmax >= 0.5 * mmin || zmax >= 0.5 * gap0)
      throw GroupCollision("eigenvalue groups merge at zeta = " + format_double(zeta));
  }

  ToySubspaces out;
  out.zeta = zeta;
  out.M_minus = invariant_subspace(A, minus);
  out.M_zero = invariant_subspace(A, zero);
  out.eig_minus = Eigen::Map<Eigen::VectorXcd>(minus.data(), static_cast<Eigen::Index>(minus.size()));
  out.eig_zero = Eigen::Map<Eigen::VectorXcd>(zero.data(), static_cast<Eigen::Index>(zero.size()));

  // Reduced operator L0 A_ns R0 on the zero block of A_s.
  Mat R0 = s0.basis_zero;
  Mat full(d, d);
  full << s0.basis_minus, s0.basis_zero;
  Mat inv = full.inverse();
  Mat L0 = inv.bottomRows(s0.n_zero);
  Mat red = L0 * m.A_ns * R0;
  std::vector<std::complex<double>> zero_minus;
  if (red.size()) {
    Eigen::EigenSolver<Mat> er(red, false);
    out.reduced_eigs = er.eigenvalues();
    double tol = default_tol_spectral(red);
    for (auto& z : zero) {
      std::complex<double> q = zeta > 0 ? z / zeta : std::complex<double>(0.0);
      int best = 0;
      for (int k = 1; k < out.reduced_eigs.size(); ++k)
        if (std::abs(out.reduced_eigs[k] - q) < std::abs(out.reduced_eigs[best] - q)) best = k;
      if (out.reduced_eigs[best].real() < -tol) zero_minus.push_back(z);
    }
  }
  out.M_zero_minus = zeta > 0 ? invariant_subspace(A, zero_minus) : Mat(d, 0);
  out.M_s.resize(d, out.M_minus.cols() + out.M_zero_minus.cols());
  out.M_s << out.M_minus, out.M_zero_minus;
  return out;
}

namespace {

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = 0, mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0)) continue;
    n += 1;
    mx += x[i];
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0)) continue;
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

}  // namespace

ToyDecay toy_decay_check(const ToyLinearModel& m, double zeta, const Vec& v0) {
  if (!(zeta > 0)) throw Error("zeta must be positive");
  SingularSystem sys = make_toy_fixed(m, zeta);
  Mat A = m.A_s + zeta * m.A_ns;
  double lam = std::abs(v0.dot(A * v0) / v0.squaredNorm());
  if (!(lam > 0)) throw Error("v0 does not decay");
  double tau_end = 12.0 / lam;
  IntegrateOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-16;
  Trajectory tt = integrate_tau(sys, v0, tau_end, o);
  Trajectory ttt = integrate_t(sys, v0, zeta * tau_end, o);
  std::vector<double> xs, ys, xt, yt;
  const int samples = 200;
  for (int i = 0; i <= samples; ++i) {
    double s = tau_end * (0.5 + 0.5 * i / samples);
    xs.push_back(s);
    ys.push_back(tt.at(s).norm());
    double t = zeta * s;
    xt.push_back(t);
    yt.push_back(ttt.at(t).norm());
  }
  ToyDecay out;
  out.rate_tau = fit_log_slope(xs, ys);
  out.rate_t = fit_log_slope(xt, yt);
  out.consistent = std::abs(out.rate_t * zeta / out.rate_tau - 1.0) < 0.05;
  return out;
}

namespace {

struct NSText {
  std::string rho, v, theta, z1, z2, zeta;
};

NSText ns_text(const NSParams& p) {
  NSText t;
  t.rho = "(" + format_double(p.rho_bar) + "+u1)";
  t.v = "(" + num(p.sigma) + "+u2)";
  t.theta = "(" + format_double(p.theta_bar) + "+u3)";
  t.z1 = "u4";
  t.z2 = "u5";
  t.zeta = "u2";
  return t;
}

}  // namespace

// Reconstruction (u = deviation from the equilibrium, z = (v_x, theta_x)):
//   p = R rho theta, p_theta = R rho, e_theta = R/(gamma-1)
//   a11 = R theta / rho, A21 = (-rho a11, 0)          -> rho row  A21^T z / a11 = -rho z1
//   Q   = A21 A21^T / a11 + diag(0, R rho) = diag(R rho theta, R rho)
//   b   = diag(nu, k), nu and k constant (so the rho_x terms of A22 drop out)
//   A22 = (1/theta) [[rho v, p_theta], [p_theta - nu z1/theta, rho v e_theta/theta]]
//   F   = (-rho z1, zeta z1, zeta z2, b^{-1} (zeta A22 - Q) z)
SingularSystem make_navier_stokes(const NSParams& p) {
  if (!(p.R > 0 && p.gamma > 1 && p.nu > 0 && p.k > 0 && p.rho_bar > 0 && p.theta_bar > 0))
    throw Error("invalid Navier-Stokes parameters");
  NSText t = ns_text(p);
  const std::string R = format_double(p.R);
  const std::string eth = format_double(p.R / (p.gamma - 1.0));
  const std::string nu = format_double(p.nu), k = format_double(p.k);
  SystemSource src;
  src.zeta = t.zeta;
  src.phi_s = {
      "-" + t.rho + "*" + t.z1,
      "0",
      "0",
      "-(" + R + "*" + t.rho + "*" + t.theta + "*" + t.z1 + ")/" + nu,
      "-(" + R + "*" + t.rho + "*" + t.z2 + ")/" + k,
  };
  src.phi_ns = {
      "0",
      t.z1,
      t.z2,
      "(" + t.rho + "*" + t.v + "/" + t.theta + "*" + t.z1 + "+" + R + "*" + t.rho + "/" + t.theta + "*" + t.z2 +
          ")/" + nu,
      "((" + R + "*" + t.rho + "-" + nu + "*" + t.z1 + "/" + t.theta + ")/" + t.theta + "*" + t.z1 + "+" + t.rho +
          "*" + t.v + "*" + eth + "/(" + t.theta + "^2)*" + t.z2 + ")/" + k,
  };
  SingularSystem sys = system_from_source(src, 5, "ns");
  sys.labels = {"rho-rho_bar", "v-sigma", "theta-theta_bar", "v_x", "theta_x"};
  const double rb = p.rho_bar, tb = p.theta_bar;
  auto guard = [rb, tb](const Vec& u) {
    if (!(rb + u[0] > 0.0)) throw DomainViolation("density must be positive");
    if (!(tb + u[2] > 0.0)) throw DomainViolation("temperature must be positive");
  };
  auto z = sys.zeta;
  auto ps = sys.phi_s, pn = sys.phi_ns;
  auto js = sys.jac_phi_s, jn = sys.jac_phi_ns;
  sys.phi_s = [ps, guard](const Vec& u) {
    guard(u);
    return ps(u);
  };
  sys.phi_ns = [pn, guard](const Vec& u) {
    guard(u);
    return pn(u);
  };
  sys.jac_phi_s = [js, guard](const Vec& u) {
    guard(u);
    return js(u);
  };
  sys.jac_phi_ns = [jn, guard](const Vec& u) {
    guard(u);
    return jn(u);
  };
  return sys;
}

Mat ns_a22_times_v(const NSParams& p, const Vec& u) {
  double rho = p.rho_bar + u[0], v = p.sigma + u[1], theta = p.theta_bar + u[2], z1 = u[3];
  if (!(rho > 0) || !(theta > 0)) throw DomainViolation("state outside the physical domain");
  double zeta = u[1];
  double pth = p.R * rho, eth = p.R / (p.gamma - 1.0);
  Mat A(2, 2);
  A << rho * v, pth, pth - p.nu * z1 / theta, rho * v * eth / theta;
  return zeta / theta * A;
}

Mat ns_stable_block(const NSParams& p) {
  Mat Q = Mat::Zero(2, 2);
  Q(0, 0) = p.R * p.rho_bar * p.theta_bar / p.nu;
  Q(1, 1) = p.R * p.rho_bar / p.k;
  return Q;
}

std::vector<std::string> builtin_names() {
  return {"example-fast", "example-ok", "example-slow", "remark-slow", "toy", "ns"};
}

bool is_builtin(const std::string& name) {
  auto n = builtin_names();
  return std::find(n.begin(), n.end(), name) != n.end() || name == "navier-stokes";
}

SingularSystem builtin_system(const std::string& name) {
  if (name == "example-fast") return make_example_fast();
  if (name == "example-ok") return make_example_ok();
  if (name == "example-slow") return make_example_slow();
  if (name == "remark-slow") return make_remark_slow();
  if (name == "toy") return make_toy_system(default_toy_model());
  if (name == "ns" || name == "navier-stokes") return make_navier_stokes();
  throw Error("unknown builtin system '" + name + "'");
}

double fast_singular_time(const Vec& u0) {
  double q = 1.0 - u0[0] * u0[0] / (2.0 * u0[1]);
  if (!(u0[1] > 0) || !(q > 0)) return std::numeric_limits<double>::infinity();
  return -std::log(q);
}

Vec oracle_fast(const Vec& u0, double t) {
  double arg = u0[0] * u0[0] + 2.0 * u0[1] * (std::exp(-t) - 1.0);
  if (!(arg > 0.0) || t >= fast_singular_time(u0)) throw OutOfValidity("past the singular time");
  Vec u(2);
  u[0] = std::copysign(std::sqrt(arg), u0[0]);
  u[1] = u0[1] * std::exp(-t);
  return u;
}

double oracle_ok_relation(const Trajectory& traj) {
  if (traj.param != Param::t) throw Error("oracle_ok_relation needs a t-trajectory");
  const Vec& u0 = traj.states.front();
  double worst = 0.0;
  for (const auto& u : traj.states) worst = std::max(worst, std::abs(u[0] - u0[0] * std::exp(u[1] - u0[1])));
  return worst;
}

double slow_blowup_time(double A) { return A > 1.0 ? std::log(A / (A - 1.0)) : std::numeric_limits<double>::infinity(); }

Vec oracle_slow(double u1_0, double A, double B, double t) {
  if (t >= slow_blowup_time(A)) throw OutOfValidity("past the singular time");
  double base = (1.0 - A) * std::exp(t) + A;
  Vec u(3);
  u[0] = u1_0 - A * u1_0 + A * u1_0 * std::exp(-t);
  u[1] = B * std::pow(base, 1.0 / ((A - 1.0) * u1_0));
  u[2] = A * u1_0 * std::exp(-t);
  return u;
}

}  // namespace smanifold
