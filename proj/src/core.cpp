#include "smanifold/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numeric>

namespace smanifold {

Vec make_state(std::initializer_list<double> v) {
  Vec u(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) u[i++] = x;
  require_finite(u, "state");
  return u;
}

void require_finite(const Vec& u, const char* what) {
  if (!u.allFinite()) throw InvalidState(std::string(what) + " has non-finite entries");
}

namespace {

void check_dim(const SingularSystem& sys, const Vec& u) {
  if (u.size() != sys.dim)
    throw DimensionMismatch("state has length " + std::to_string(u.size()) + ", system dimension is " +
                            std::to_string(sys.dim));
}

double smoothstep5(double s) { return s * s * s * (s * (6.0 * s - 15.0) + 10.0); }
double smoothstep5_deriv(double s) { return 30.0 * s * s * (s - 1.0) * (s - 1.0); }

double bump_at(const SingularSystem& sys, const Vec& u) {
  return sys.cutoff_delta ? cutoff_bump(u.norm(), *sys.cutoff_delta) : 1.0;
}

}  // namespace

double cutoff_bump(double r, double delta) {
  if (r <= delta) return 1.0;
  if (r >= 2.0 * delta) return 0.0;
  return 1.0 - smoothstep5((r - delta) / delta);
}

double cutoff_bump_deriv(double r, double delta) {
  if (r <= delta || r >= 2.0 * delta) return 0.0;
  return -smoothstep5_deriv((r - delta) / delta) / delta;
}

double eval_zeta(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  return sys.zeta(u);
}

Vec eval_grad_zeta(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  if (sys.grad_zeta) return sys.grad_zeta(u);
  return gradient_fd(sys.zeta, u);
}

Vec eval_phi_s(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  double b = bump_at(sys, u);
  if (b == 0.0) return Vec::Zero(sys.dim);
  Vec p = sys.phi_s(u);
  if (p.size() != sys.dim) throw DimensionMismatch("phi_s returned wrong length");
  return b == 1.0 ? p : Vec(b * p);
}

Vec eval_phi_ns(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  double b = bump_at(sys, u);
  if (b == 0.0) return Vec::Zero(sys.dim);
  Vec p = sys.phi_ns(u);
  if (p.size() != sys.dim) throw DimensionMismatch("phi_ns returned wrong length");
  return b == 1.0 ? p : Vec(b * p);
}

Vec eval_F(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  double b = bump_at(sys, u);
  if (b == 0.0) return Vec::Zero(sys.dim);
  Vec ps = sys.phi_s(u);
  Vec pn = sys.phi_ns(u);
  if (ps.size() != sys.dim || pn.size() != sys.dim) throw DimensionMismatch("field returned wrong length");
  Vec f = ps + sys.zeta(u) * pn;
  return b == 1.0 ? f : Vec(b * f);
}

Vec eval_rhs_t(const SingularSystem& sys, const Vec& u, double zeta_floor) {
  check_dim(sys, u);
  double z = sys.zeta(u);
  if (!(std::abs(z) >= zeta_floor))
    throw SingularityProximity("|zeta| = " + std::to_string(std::abs(z)) + " below floor");
  return eval_phi_s(sys, u) / z + eval_phi_ns(sys, u);
}

Mat jacobian_fd(const VectorFn& f, const Vec& u) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  Vec x = u;
  Mat J;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double h = h0 * std::max(1.0, std::abs(u[i]));
    x[i] = u[i] + h;
    Vec fp = f(x);
    x[i] = u[i] - h;
    Vec fm = f(x);
    x[i] = u[i];
    if (i == 0) J.resize(fp.size(), u.size());
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

Vec gradient_fd(const ScalarFn& f, const Vec& u) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  Vec x = u, g(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double h = h0 * std::max(1.0, std::abs(u[i]));
    x[i] = u[i] + h;
    double fp = f(x);
    x[i] = u[i] - h;
    double fm = f(x);
    x[i] = u[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Mat jacobian_F_fd(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  return jacobian_fd([&](const Vec& x) { return eval_F(sys, x); }, u);
}

Mat jacobian_F(const SingularSystem& sys, const Vec& u) {
  check_dim(sys, u);
  if (!sys.analytic()) return jacobian_F_fd(sys, u);
  double r = u.norm();
  double b = sys.cutoff_delta ? cutoff_bump(r, *sys.cutoff_delta) : 1.0;
  if (b == 0.0) return Mat::Zero(sys.dim, sys.dim);
  double z = sys.zeta(u);
  Vec pn = sys.phi_ns(u);
  Mat J = sys.jac_phi_s(u) + pn * sys.grad_zeta(u).transpose() + z * sys.jac_phi_ns(u);
  if (b == 1.0 && !(sys.cutoff_delta && r > *sys.cutoff_delta)) return J;
  Vec f = sys.phi_s(u) + z * pn;
  Vec grad_b = Vec::Zero(sys.dim);
  if (r > 0.0) grad_b = cutoff_bump_deriv(r, *sys.cutoff_delta) * u / r;
  return b * J + f * grad_b.transpose();
}

SingularSystem apply_cutoff(const SingularSystem& sys, double delta) {
  if (!(delta > 0.0)) throw Error("cutoff radius must be positive");
  SingularSystem out = sys;
  out.cutoff_delta = delta;
  return out;
}

double default_tol_spectral(const Mat& m) {
  Eigen::EigenSolver<Mat> es(m, false);
  if (es.info() != Eigen::Success) throw EigenFailure("eigensolver did not converge");
  double rho = es.eigenvalues().size() ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  return 1e-8 * (1.0 + rho);
}

SpectralSplit spectral_split(const Mat& m, double tol_spectral) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw DimensionMismatch("spectral_split needs a square matrix");
  if (!m.allFinite()) throw EigenFailure("matrix has non-finite entries");
  SpectralSplit out;
  if (n == 0) return out;
  Eigen::EigenSolver<Mat> es(m, false);
  if (es.info() != Eigen::Success) throw EigenFailure("eigensolver did not converge");
  Eigen::VectorXcd ev = es.eigenvalues();
  out.eigenvalues = ev;
  double rho = ev.cwiseAbs().maxCoeff();
  out.tol_spectral = tol_spectral > 0.0 ? tol_spectral : 1e-8 * (1.0 + rho);

  // Defective eigenvalues split by O(eps^(1/k)); merge anything closer than the link distance.
  const double link = 1e-5 * (1.0 + m.norm());
  std::vector<int> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(ev[i] - ev[j]) < link) parent[find(i)] = find(j);

  struct Cluster {
    std::complex<double> mean{0.0, 0.0};
    int size = 0;
  };
  std::vector<Cluster> clusters(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    clusters[find(i)].mean += ev[i];
    clusters[find(i)].size += 1;
  }

  const double scale = std::max(1.0, rho);
  const Mat B = m / scale;
  const Mat I = Mat::Identity(n, n);
  Mat prod[3] = {I, I, I};
  int count[3] = {0, 0, 0};
  double min_minus = std::numeric_limits<double>::infinity();

  for (int i = 0; i < n; ++i) {
    Cluster& cl = clusters[i];
    if (cl.size == 0) continue;
    std::complex<double> mu = cl.mean / static_cast<double>(cl.size);
    int cls = mu.real() < -out.tol_spectral ? 0 : (std::abs(mu.real()) <= out.tol_spectral ? 1 : 2);
    count[cls] += cl.size;
    if (cls == 0) min_minus = std::min(min_minus, std::abs(mu.real()));
    if (std::abs(mu.imag()) <= link) {
      Mat f = B - (mu.real() / scale) * I;
      for (int k = 0; k < cl.size; ++k) prod[cls] = prod[cls] * f;
    } else if (mu.imag() > 0.0) {
      // Real quadratic factor covers this cluster and its conjugate partner.
      double a = mu.real() / scale, b2 = std::norm(mu) / (scale * scale);
      Mat f = B * B - 2.0 * a * B + b2 * I;
      for (int k = 0; k < cl.size; ++k) prod[cls] = prod[cls] * f;
    }
  }

  Mat* bases[3] = {&out.basis_minus, &out.basis_zero, &out.basis_plus};
  for (int cls = 0; cls < 3; ++cls) {
    int k = count[cls];
    if (k == 0) {
      bases[cls]->resize(n, 0);
      continue;
    }
    if (k == n) {
      *bases[cls] = I;
      continue;
    }
    Mat P = prod[cls];
    double pn = P.norm();
    if (pn > 0.0) P /= pn;
    Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeFullV);
    *bases[cls] = svd.matrixV().rightCols(k);
  }
  out.n_minus = count[0];
  out.n_zero = count[1];
  out.n_plus = count[2];
  out.c = count[0] ? 0.9 * min_minus : 0.0;
  return out;
}

ScalarField scalar_field_from_expr(const std::string& text, int dim) {
  Expr e = Expr::parse(text, dim);
  ScalarField f;
  f.text = text;
  f.value = [e](const Vec& u) { return e.eval(u.data()); };
  f.grad = [e](const Vec& u) {
    Vec g(u.size());
    e.eval_grad(u.data(), g.data());
    return g;
  };
  return f;
}

SingularSystem rescale_system(const SingularSystem& sys, const ScalarField& f) {
  SingularSystem out = sys;
  out.name = sys.name + "*f";
  auto zeta = sys.zeta;
  auto phi_s = sys.phi_s;
  auto fv = f.value;
  out.zeta = [zeta, fv](const Vec& u) { return zeta(u) * fv(u); };
  out.phi_s = [phi_s, fv](const Vec& u) { return Vec(phi_s(u) * fv(u)); };
  if (sys.analytic() && f.grad) {
    auto gz = sys.grad_zeta;
    auto js = sys.jac_phi_s;
    auto fg = f.grad;
    out.grad_zeta = [zeta, gz, fv, fg](const Vec& u) { return Vec(gz(u) * fv(u) + zeta(u) * fg(u)); };
    out.jac_phi_s = [phi_s, js, fv, fg](const Vec& u) {
      return Mat(js(u) * fv(u) + phi_s(u) * fg(u).transpose());
    };
  } else {
    out.grad_zeta = nullptr;
    out.jac_phi_s = nullptr;
    out.jac_phi_ns = nullptr;
  }
  if (sys.source && !f.text.empty()) {
    SystemSource src = *sys.source;
    src.zeta = "(" + src.zeta + ")*(" + f.text + ")";
    for (auto& s : src.phi_s) s = "(" + s + ")*(" + f.text + ")";
    out.source = src;
  } else {
    out.source.reset();
  }
  return out;
}

SingularSystem rotate_system(const SingularSystem& sys, const Mat& q) {
  if (q.rows() != sys.dim || q.cols() != sys.dim) throw DimensionMismatch("rotation has wrong size");
  SingularSystem out = sys;
  out.name = sys.name + "*Q";
  out.labels.clear();
  for (int i = 0; i < sys.dim; ++i) out.labels.push_back("x" + std::to_string(i + 1));
  auto zeta = sys.zeta;
  auto ps = sys.phi_s;
  auto pn = sys.phi_ns;
  Mat Q = q;
  out.zeta = [zeta, Q](const Vec& x) { return zeta(Q * x); };
  out.phi_s = [ps, Q](const Vec& x) { return Vec(Q.transpose() * ps(Q * x)); };
  out.phi_ns = [pn, Q](const Vec& x) { return Vec(Q.transpose() * pn(Q * x)); };
  if (sys.analytic()) {
    auto gz = sys.grad_zeta;
    auto js = sys.jac_phi_s;
    auto jn = sys.jac_phi_ns;
    out.grad_zeta = [gz, Q](const Vec& x) { return Vec(Q.transpose() * gz(Q * x)); };
    out.jac_phi_s = [js, Q](const Vec& x) { return Mat(Q.transpose() * js(Q * x) * Q); };
    out.jac_phi_ns = [jn, Q](const Vec& x) { return Mat(Q.transpose() * jn(Q * x) * Q); };
  }
  out.source.reset();
  return out;
}

}  // namespace smanifold
