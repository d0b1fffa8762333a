#include "smanifold/manifolds.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

namespace smanifold {

namespace {

// Gauss-Legendre nodes and weights on [0, 1].
const double kGaussX[8] = {0.019855071751231856, 0.10166676129318664, 0.2372337950418355, 0.4082826787521751,
                           0.5917173212478249,   0.7627662049581645,  0.8983332387068134, 0.9801449282487681};
const double kGaussW[8] = {0.05061426814518813, 0.11119051722668724, 0.15685332293894363, 0.18134189168918100,
                           0.18134189168918100, 0.15685332293894363, 0.11119051722668724, 0.05061426814518813};

Mat kernel_of(const Mat& m, double tol) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > tol) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

// Central differences of f with respect to the listed coordinates of x.
Mat jac_cols(const std::function<Vec(const Vec&)>& f, const Vec& x, const std::vector<int>& idx) {
  Mat out;
  for (size_t k = 0; k < idx.size(); ++k) {
    int i = idx[k];
    double h = 6e-6 * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    Vec d = (f(xp) - f(xm)) / (2 * h);
    if (k == 0) out.resize(d.size(), idx.size());
    out.col(k) = d;
  }
  return out;
}

std::vector<int> range(int a, int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + i;
  return v;
}

// Column signs so the largest entry of each column is positive.
void normalize_columns(Mat& b) {
  for (int j = 0; j < b.cols(); ++j) {
    b.col(j).normalize();
    Eigen::Index k;
    b.col(j).cwiseAbs().maxCoeff(&k);
    if (b(k, j) < 0) b.col(j) = -b.col(j);
  }
}

}  // namespace

SplitCoordinates linear_normalize(const Mat& m, const SpectralSplit& split, double M) {
  if (split.n_plus > 0) throw HypothesisViolation("linear_normalize needs no eigenvalue with positive real part");
  if (!(M > 0)) throw InvalidState("M must be positive");
  const int n = static_cast<int>(m.rows());
  const int nz = split.n_zero, nm = split.n_minus;
  Mat bz = split.basis_zero, bm = split.basis_minus;
  normalize_columns(bz);
  normalize_columns(bm);
  Mat T0(n, n);
  if (nz) T0.leftCols(nz) = bz;
  if (nm) T0.rightCols(nm) = bm;
  Mat T0inv = T0.inverse();
  Mat A = T0inv * m * T0;

  SplitCoordinates sc;
  sc.n_zero = nz;
  sc.n_minus = nm;
  Mat Z = A.topLeftCorner(nz, nz);
  Mat S = Mat::Identity(nz, nz);  // zero-block change: block = S^{-1} Z S
  Mat Abar = Mat::Zero(nz, nz), Nz = Mat::Zero(nz, nz);
  if (nz > 0) {
    Eigen::RealSchur<Mat> schur(Z);
    if (schur.info() != Eigen::Success) throw EigenFailure("real Schur decomposition failed");
    Mat Q = schur.matrixU();
    Mat R = schur.matrixT();
    // Already upper triangular (up to 2x2 blocks) zero blocks need no reordering when
    // the Schur form differs from the input only by a sign-permutation.
    std::vector<int> start;
    for (int i = 0; i < nz;) {
      start.push_back(i);
      i += (i + 1 < nz && std::abs(R(i + 1, i)) > 0.0) ? 2 : 1;
    }
    start.push_back(nz);
    int nb = static_cast<int>(start.size()) - 1;
    // Scale each 2x2 block to skew-symmetric form.
    Vec dsc = Vec::Ones(nz);
    for (int b = 0; b < nb; ++b) {
      int i = start[b];
      if (start[b + 1] - i == 2) {
        double p = R(i, i + 1), q = R(i + 1, i);
        if (p * q < 0) dsc[i + 1] = std::sqrt(-q / p);
      }
    }
    Mat D1 = dsc.asDiagonal();
    Mat R1 = D1 * R * D1.inverse();
    // Block-diagonal part is Abar, the rest is N; shrink N by diag(eta^k) per block.
    auto split_parts = [&](const Mat& r, Mat& ab, Mat& nn) {
      ab = Mat::Zero(nz, nz);
      for (int b = 0; b < nb; ++b) {
        int i = start[b], w = start[b + 1] - i;
        ab.block(i, i, w, w) = r.block(i, i, w, w);
        if (w == 1) ab(i, i) = 0.0;  // real part is zero within tolerance
        else {
          double tr = 0.5 * (ab(i, i) + ab(i + 1, i + 1));
          ab(i, i) -= tr;
          ab(i + 1, i + 1) -= tr;
          double off = 0.5 * (ab(i, i + 1) - ab(i + 1, i));
          ab(i, i + 1) = off;
          ab(i + 1, i) = -off;
          ab(i, i) = ab(i + 1, i + 1) = 0.0;
        }
      }
      nn = r - ab;
    };
    double eta = 1.0;
    Mat Dk = Mat::Identity(nz, nz);
    Mat R2 = R1;
    for (int it = 0; it < 200; ++it) {
      Vec dv(nz);
      for (int b = 0; b < nb; ++b)
        for (int i = start[b]; i < start[b + 1]; ++i) dv[i] = std::pow(eta, b);
      Dk = dv.asDiagonal();
      R2 = Dk.inverse() * R1 * Dk;
      split_parts(R2, Abar, Nz);
      if (Nz.norm() <= 1.0 / M) break;
      eta *= 0.5;
    }
    sc.eta = eta;
    S = Q * D1.inverse() * Dk;
  }
  sc.nilpotent_norm = nz ? Nz.norm() : 0.0;
  sc.A_zero_bar = Abar;
  sc.N_zero = Nz;
  Mat Sfull = Mat::Identity(n, n);
  if (nz) Sfull.topLeftCorner(nz, nz) = S;
  sc.inverse = T0 * Sfull;
  sc.transform = sc.inverse.inverse();
  sc.A = sc.transform * m * sc.inverse;
  sc.A_minus = sc.A.bottomRightCorner(nm, nm);
  return sc;
}

SplitCoordinates linear_normalize(const SingularSystem& sys, double M) {
  Mat j = jacobian_F(sys, Vec::Zero(sys.dim));
  return linear_normalize(j, spectral_split(j), M);
}

Vec CenterGraph::point(const Vec& x) const {
  Vec u = basis_center * x;
  if (n_minus) u += basis_minus * h.eval(x);
  return u;
}

CenterGraph center_graph(const SingularSystem& sys, int order, double radius) {
  const int N = sys.dim;
  if (radius <= 0) radius = 0.25 * (sys.cutoff_delta ? *sys.cutoff_delta : 0.1);
  Mat J0 = jacobian_F(sys, Vec::Zero(N));
  SpectralSplit sp = spectral_split(J0);
  if (sp.n_plus > 0) throw HypothesisViolation("center_graph needs no eigenvalue with positive real part");
  CenterGraph cg;
  cg.n_center = sp.n_zero;
  cg.n_minus = sp.n_minus;
  cg.basis_center = sp.basis_zero;
  cg.basis_minus = sp.basis_minus;
  normalize_columns(cg.basis_center);
  normalize_columns(cg.basis_minus);
  Mat T(N, N);
  if (cg.n_center) T.leftCols(cg.n_center) = cg.basis_center;
  if (cg.n_minus) T.rightCols(cg.n_minus) = cg.basis_minus;
  cg.to_split = T.inverse();
  cg.radius = radius;
  cg.h.n_base = cg.n_center;
  cg.h.n_fiber = cg.n_minus;
  cg.h.L = Mat::Zero(cg.n_minus, cg.n_center);
  cg.h.C = Mat::Zero(cg.n_minus, 0);
  if (cg.n_center == 0 || cg.n_minus == 0) return cg;

  GraphProblem p;
  p.n_base = cg.n_center;
  p.n_fiber = cg.n_minus;
  p.min_degree = 2;
  p.order = order;
  p.radius = radius;
  p.seed = 17;
  const Mat& Ti = cg.to_split;
  p.field = [&](const Vec& x, const Vec& y, Vec& fb, Vec& ff) {
    Vec u = cg.basis_center * x + cg.basis_minus * y;
    Vec f = Ti * eval_F(sys, u);
    fb = f.head(cg.n_center);
    ff = f.tail(cg.n_minus);
  };
  GraphFit fit = fit_invariant_graph(p);
  cg.h = fit.graph;
  cg.residual = fit.residual_max;
  cg.cond = fit.cond;
  cg.resonance_warning = fit.resonance_warning;
  return cg;
}

Vec ShearStage::apply(const Vec& x) const {
  Vec xb(base.size());
  for (size_t i = 0; i < base.size(); ++i) xb[i] = x[base[i]];
  Vec d = g.eval(xb);
  Vec y = x;
  for (size_t i = 0; i < fiber.size(); ++i) y[fiber[i]] += d[i];
  return y;
}

Mat ShearStage::jac(const Vec& x) const {
  Vec xb(base.size());
  for (size_t i = 0; i < base.size(); ++i) xb[i] = x[base[i]];
  Mat dg = g.jac(xb);
  Mat J = Mat::Identity(x.size(), x.size());
  for (size_t i = 0; i < fiber.size(); ++i)
    for (size_t k = 0; k < base.size(); ++k) J(fiber[i], base[k]) += dg(i, k);
  return J;
}

Vec NormalForm::to_original(const Vec& xbar) const {
  Vec y = xbar;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) y = it->apply(y);
  return P * y;
}

Mat NormalForm::dpsi(const Vec& xbar) const {
  Vec y = xbar;
  Mat J = Mat::Identity(dim, dim);
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    J = it->jac(y) * J;
    y = it->apply(y);
  }
  return P * J;
}

Vec NormalForm::from_original(const Vec& u) const {
  Vec x = P.lu().solve(u);
  for (int it = 0; it < 50; ++it) {
    Vec r = to_original(x) - u;
    if (r.norm() <= 1e-15 * (1.0 + u.norm())) break;
    Vec dx = dpsi(x).lu().solve(r);
    x -= dx;
    if (dx.norm() <= 1e-16 * (1.0 + x.norm())) break;
  }
  return x;
}

Vec NormalForm::field(const Vec& xbar) const {
  Vec u = to_original(xbar);
  return dpsi(xbar).lu().solve(eval_F(sys, u));
}

Vec NormalForm::pack(double zeta, const Vec& u0v, const Vec& umv) const {
  Vec x(dim);
  x[0] = zeta;
  if (n0) x.segment(1, n0) = u0v;
  if (n_minus) x.tail(n_minus) = umv;
  return x;
}

Vec NormalForm::f_minus(const Vec& xm, const Vec& x0) const {
  return field(pack(x0[0], x0.tail(n0), xm)).tail(n_minus);
}

Vec NormalForm::f_zero(const Vec& xm, const Vec& x0) const {
  Vec f = field(pack(x0[0], x0.tail(n0), xm)).head(1 + n0);
  if (x0[0] == 0.0) return Vec::Zero(1 + n0);
  return f - field(pack(0.0, x0.tail(n0), xm)).head(1 + n0);
}

Mat NormalForm::G_s(const Vec& xbar) const {
  Mat g = Mat::Zero(n_minus, n_minus);
  if (!n_minus) return g;
  auto fm = [&](const Vec& x) { return Vec(field(x).tail(n_minus)); };
  auto idx = range(1 + n0, n_minus);
  for (int k = 0; k < 8; ++k) {
    Vec x = xbar;
    x.tail(n_minus) *= kGaussX[k];
    g += kGaussW[k] * jac_cols(fm, x, idx);
  }
  return g;
}

Mat NormalForm::G_c(const Vec& xbar) const {
  Mat g = Mat::Zero(n0, n0);
  if (!n0) return g;
  auto f0 = [&](const Vec& x) { return Vec(field(x).segment(1, n0)); };
  auto idx = range(1, n0);
  for (int k = 0; k < 8; ++k) {
    Vec x = xbar;
    x.segment(1, n0) *= kGaussX[k];
    g += kGaussW[k] * jac_cols(f0, x, idx);
  }
  return g;
}

Mat NormalForm::G_0minus(const Vec& xbar) const {
  if (!n0) return Mat::Zero(0, 0);
  double z = xbar[0];
  if (std::abs(z) > 1e-7) {
    Vec x0 = xbar;
    x0[0] = 0.0;
    return (G_c(xbar) - G_c(x0)) / z;
  }
  const double h = 1e-5;
  Vec xp = xbar, xm = xbar;
  xp[0] += h;
  xm[0] -= h;
  return (G_c(xp) - G_c(xm)) / (2 * h);
}

Mat NormalForm::G_01(double zeta, const Vec& u0v) const {
  return G_0minus(pack(zeta, u0v, Vec::Zero(n_minus)));
}

namespace {

// (F1(zeta, .) - F1(0, .)) / zeta, the first remainder of the zeta equation.
double g1_of(const NormalForm& nf, const Vec& x) {
  double z = x[0];
  if (std::abs(z) > 1e-7) {
    Vec x0 = x;
    x0[0] = 0.0;
    return (nf.field(x)[0] - nf.field(x0)[0]) / z;
  }
  const double h = 1e-5;
  Vec xp = x, xm = x;
  xp[0] += h;
  xm[0] -= h;
  return (nf.field(xp)[0] - nf.field(xm)[0]) / (2 * h);
}

}  // namespace

Vec NormalForm::G_1minus(const Vec& xbar) const {
  Vec g = Vec::Zero(n_minus);
  if (!n_minus) return g;
  auto f = [&](const Vec& x) { return Vec::Constant(1, g1_of(*this, x)); };
  auto idx = range(1 + n0, n_minus);
  for (int k = 0; k < 8; ++k) {
    Vec x = xbar;
    x.tail(n_minus) *= kGaussX[k];
    g += kGaussW[k] * jac_cols(f, x, idx).row(0).transpose();
  }
  return g;
}

Vec NormalForm::G_10(double zeta, const Vec& u0v) const {
  Vec g = Vec::Zero(n0);
  if (!n0) return g;
  std::function<Vec(const Vec&)> f;
  if (waive_slow) {
    f = [&](const Vec& x) { return Vec::Constant(1, g1_of(*this, x)); };
  } else {
    f = [&](const Vec& x) {
      double z = x[0];
      Vec x0 = x;
      x0[0] = 0.0;
      double v;
      if (std::abs(z) > 1e-7) {
        v = (g1_of(*this, x) - g1_of(*this, x0)) / z;
      } else {
        const double h = 1e-5;
        Vec xp = x, xm = x;
        xp[0] += h;
        xm[0] -= h;
        v = (g1_of(*this, xp) - g1_of(*this, xm)) / (2 * h);
      }
      return Vec::Constant(1, v);
    };
  }
  auto idx = range(1, n0);
  for (int k = 0; k < 8; ++k) {
    Vec x = pack(zeta, u0v * kGaussX[k], Vec::Zero(n_minus));
    g += kGaussW[k] * jac_cols(f, x, idx).row(0).transpose();
  }
  return g;
}

Vec NormalForm::reassemble(const Vec& xbar) const {
  double z = xbar[0];
  Vec u0v = u0(xbar), umv = um(xbar);
  Vec r(dim);
  double r1 = 0.0;
  if (n_minus) r1 += z * G_1minus(xbar).dot(umv);
  if (n0) r1 += (waive_slow ? z : z * z) * G_10(z, u0v).dot(u0v);
  r[0] = r1;
  if (n0) {
    Mat inner = G_01(z, u0v) + G_0minus(xbar) - G_0minus(pack(z, u0v, Vec::Zero(n_minus)));
    r.segment(1, n0) = z * inner * u0v;
  }
  if (n_minus) r.tail(n_minus) = G_s(xbar) * umv;
  return r;
}

double NormalForm::measure_reassembly(int n_samples, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  double err = 0.0, scale = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Vec u = sample_ball(dim, 0.5 * delta, rng);
    Vec x = from_original(u);
    Vec f = field(x);
    Vec r = reassemble(x);
    err = std::max(err, (r - f).lpNorm<Eigen::Infinity>());
    scale = std::max(scale, f.lpNorm<Eigen::Infinity>());
  }
  return scale > 0 ? err / scale : err;
}

namespace {

// Field of a partially built normal form (current stages) in its own coordinates.
struct StageBuilder {
  NormalForm& nf;
  double r_fit;
  const NormalFormOptions& opts;

  ShearStage fit_graph_stage(const std::string& name, const std::vector<int>& base, const std::vector<int>& fiber,
                             GraphProblem p, bool strip_linear) {
    GraphFit best;
    bool have = false;
    for (int order = opts.order; order <= std::max(opts.order, opts.max_order); order += 2) {
      p.order = order;
      GraphFit fit = fit_invariant_graph(p);
      double rel = fit.residual_max / std::max(fit.field_scale, 1e-300);
      if (!have || fit.residual_max < best.residual_max) {
        best = fit;
        have = true;
        nf.order_used = std::max(nf.order_used, order);
      }
      if (rel <= opts.fit_tol) break;
    }
    ShearStage st;
    st.name = name;
    st.base = base;
    st.fiber = fiber;
    st.g = best.graph;
    if (strip_linear) st.g.L = Mat::Zero(st.g.n_fiber, st.g.n_base);
    st.residual = best.residual_max;
    return st;
  }
};

}  // namespace

NormalForm normal_form(const SingularSystem& sys, const NormalFormOptions& opts) {
  const int N = sys.dim;
  NormalForm nf;
  nf.sys = sys;
  nf.dim = N;
  nf.waive_slow = opts.waive_slow;
  nf.delta = opts.delta > 0 ? opts.delta : (sys.cutoff_delta ? *sys.cutoff_delta : 0.1);
  const double r_fit = 0.75 * nf.delta;

  Vec o = Vec::Zero(N);
  Mat J0 = jacobian_F(sys, o);
  SpectralSplit sp = spectral_split(J0);
  if (sp.n_plus > 0) throw HypothesisViolation("normal form needs no eigenvalue with positive real part");
  if (sp.n_zero < 1) throw HypothesisViolation("normal form needs a nontrivial center space");
  nf.c = sp.c;
  nf.n_minus = sp.n_minus;
  nf.n0 = sp.n_zero - 1;
  const int n0 = nf.n0, nm = nf.n_minus;
  Vec g0 = eval_grad_zeta(sys, o);
  if (g0.norm() <= 1e-12) throw HypothesisViolation("grad zeta vanishes at the origin");

  // Linear stage: zeta direction along the equilibrium curve, rest of the center space inside ker grad zeta.
  Mat K = kernel_of(J0, 1e-8 * (1.0 + J0.norm()));
  Vec eE;
  Vec a = K.cols() ? Vec(K.transpose() * g0) : Vec();
  if (K.cols() && a.norm() > 1e-10 * g0.norm()) {
    eE = K * a;
  } else {
    Mat bc = sp.basis_zero;
    eE = bc * (bc.transpose() * g0);
    if (eE.norm() < 1e-12) throw HypothesisViolation("center space is tangent to the singular set");
  }
  eE /= g0.dot(eE);
  Mat bz = sp.basis_zero;
  Mat W = bz - eE * (g0.transpose() * bz);
  Mat Wc(N, n0);
  if (n0) {
    Eigen::JacobiSVD<Mat> svd(W, Eigen::ComputeThinU);
    Wc = svd.matrixU().leftCols(n0);
    normalize_columns(Wc);
  }
  Mat bm = sp.basis_minus;
  normalize_columns(bm);
  nf.P.resize(N, N);
  nf.P.col(0) = eE;
  if (n0) nf.P.block(0, 1, N, n0) = Wc;
  if (nm) nf.P.rightCols(nm) = bm;

  StageBuilder sb{nf, r_fit, opts};
  std::mt19937_64 rng(opts.seed);

  // Zeta straightening: x0 -> x0 + g(x) so that zeta(U) is the first coordinate.
  {
    bool exact = true;
    for (int i = 0; i < 40 && exact; ++i) {
      Vec x = sample_ball(N, r_fit, rng);
      double z = eval_zeta(sys, nf.P * x);
      if (std::abs(z - x[0]) > 1e-14 * (1.0 + std::abs(z))) exact = false;
    }
    if (!exact) {
      MonomialBasis mb = MonomialBasis::make(N, 1, std::max(opts.order, opts.max_order));
      const int npts = 3 * mb.size() + 40;
      Mat A(npts, mb.size());
      Vec b(npts);
      for (int k = 0; k < npts; ++k) {
        Vec xb = sample_ball(N, r_fit, rng);
        Vec x = xb;
        for (int it = 0; it < 50; ++it) {
          Vec u = nf.P * x;
          double res = eval_zeta(sys, u) - xb[0];
          if (std::abs(res) < 1e-15) break;
          double d = eval_grad_zeta(sys, u).dot(nf.P.col(0));
          x[0] -= res / d;
        }
        A.row(k) = mb.eval(xb / r_fit).transpose();
        b[k] = x[0] - xb[0];
      }
      Vec coef = A.colPivHouseholderQr().solve(b);
      ShearStage st;
      st.name = "zeta";
      st.base = range(0, N);
      st.fiber = {0};
      st.g.n_base = N;
      st.g.n_fiber = 1;
      st.g.L = Mat::Zero(1, N);
      st.g.basis = mb;
      st.g.scale = r_fit;
      st.g.C = coef.transpose();
      st.residual = (A * coef - b).lpNorm<Eigen::Infinity>();
      nf.stages.push_back(st);
    }
  }

  // Equilibrium curve: y' = yE(zeta) straightened to the zeta axis.
  if (N > 1) {
    const int deg = std::max(opts.order, opts.max_order);
    const int nz = 2 * deg + 5;
    std::vector<double> zs;
    std::vector<Vec> ys;
    Vec y = Vec::Zero(N - 1);
    for (int k = 0; k < nz; ++k) {
      double z = r_fit * std::cos(M_PI * (k + 0.5) / nz);
      zs.push_back(z);
    }
    std::sort(zs.begin(), zs.end(), [](double p, double q) { return std::abs(p) < std::abs(q); });
    bool all_zero = true;
    for (double z : zs) {
      Vec yk = Vec::Zero(N - 1);
      bool ok = false;
      for (int it = 0; it < 40; ++it) {
        Vec x(N);
        x[0] = z;
        x.tail(N - 1) = yk;
        Vec f = nf.field(x);
        if (f.norm() <= 1e-14 * (1.0 + J0.norm())) {
          ok = true;
          break;
        }
        auto fx = [&](const Vec& xx) { return nf.field(xx); };
        Mat Jy = jac_cols(fx, x, range(1, N - 1));
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(Jy);
        Vec d = cod.solve(-f);
        yk += d;
        if (d.norm() < 1e-16) {
          ok = f.norm() <= 1e-10;
          break;
        }
      }
      if (!ok) throw HypothesisViolation("no equilibrium curve through the origin transversal to the singular set");
      ys.push_back(yk);
      if (yk.norm() > 1e-15) all_zero = false;
    }
    if (!all_zero) {
      MonomialBasis mb = MonomialBasis::make(1, 1, deg);
      Mat A(nz, mb.size());
      Mat B(nz, N - 1);
      for (int k = 0; k < nz; ++k) {
        A.row(k) = mb.eval(Vec::Constant(1, zs[k] / r_fit)).transpose();
        B.row(k) = ys[k].transpose();
      }
      Mat coef = A.colPivHouseholderQr().solve(B);
      ShearStage st;
      st.name = "equilibria";
      st.base = {0};
      st.fiber = range(1, N - 1);
      st.g.n_base = 1;
      st.g.n_fiber = N - 1;
      st.g.L = Mat::Zero(N - 1, 1);
      st.g.basis = mb;
      st.g.scale = r_fit;
      st.g.C = coef.transpose();
      st.residual = (A * coef - B).lpNorm<Eigen::Infinity>();
      nf.stages.push_back(st);
    }
  }

  auto add_if_nontrivial = [&](ShearStage st) {
    if (st.g.C.size() && st.g.C.lpNorm<Eigen::Infinity>() > 1e-15) nf.stages.push_back(st);
  };

  // Center manifold u- = h(zeta, u0), vanishing on the equilibrium curve.
  if (n0 > 0 && nm > 0) {
    GraphProblem p;
    p.n_base = 1 + n0;
    p.n_fiber = nm;
    p.min_degree = 1;
    p.radius = r_fit;
    p.seed = opts.seed + 1;
    p.keep = [n0](const std::vector<int>& e) {
      int d = 0;
      for (int i = 1; i <= n0; ++i) d += e[i];
      return d >= 1;
    };
    p.field = [&](const Vec& yb, const Vec& yf, Vec& fb, Vec& ff) {
      Vec x(N);
      x.head(1 + n0) = yb;
      x.tail(nm) = yf;
      Vec f = nf.field(x);
      fb = f.head(1 + n0);
      ff = f.tail(nm);
    };
    add_if_nontrivial(sb.fit_graph_stage("center", range(0, 1 + n0), range(1 + n0, nm), p, false));
  }

  // Fibers over the equilibrium curve: u0 = g(zeta, u-), vanishing at u- = 0.
  if (n0 > 0 && nm > 0) {
    GraphProblem p;
    p.n_base = 1 + nm;
    p.n_fiber = n0;
    p.min_degree = 1;
    p.radius = r_fit;
    p.seed = opts.seed + 2;
    p.keep = [nm](const std::vector<int>& e) {
      int d = 0;
      for (int i = 1; i <= nm; ++i) d += e[i];
      return d >= 1;
    };
    p.field = [&](const Vec& yb, const Vec& yf, Vec& fb, Vec& ff) {
      Vec x(N);
      x[0] = yb[0];
      x.segment(1, n0) = yf;
      x.tail(nm) = yb.tail(nm);
      Vec f = nf.field(x);
      fb.resize(1 + nm);
      fb[0] = f[0];
      fb.tail(nm) = f.tail(nm);
      ff = f.segment(1, n0);
    };
    std::vector<int> base{0};
    for (int i = 0; i < nm; ++i) base.push_back(1 + n0 + i);
    add_if_nontrivial(sb.fit_graph_stage("stable_fibers", base, range(1, n0), p, false));
  }

  // Stable fibers inside the singular set: u0 = p + k(p, u-).
  if (n0 > 0 && nm > 0) {
    GraphProblem p;
    p.n_base = n0 + nm;
    p.n_fiber = n0;
    p.min_degree = 2;
    p.radius = r_fit;
    p.seed = opts.seed + 3;
    p.L = Mat::Zero(n0, n0 + nm);
    p.L.leftCols(n0) = Mat::Identity(n0, n0);
    p.keep = [n0, nm](const std::vector<int>& e) {
      int dp = 0, dw = 0;
      for (int i = 0; i < n0; ++i) dp += e[i];
      for (int i = 0; i < nm; ++i) dw += e[n0 + i];
      return dp >= 1 && dw >= 1;
    };
    p.field = [&](const Vec& yb, const Vec& yf, Vec& fb, Vec& ff) {
      Vec x(N);
      x[0] = 0.0;
      x.segment(1, n0) = yf;
      x.tail(nm) = yb.tail(nm);
      Vec f = nf.field(x);
      fb = Vec::Zero(n0 + nm);
      fb.tail(nm) = f.tail(nm);
      ff = f.segment(1, n0);
    };
    add_if_nontrivial(sb.fit_graph_stage("singular_fibers", range(1, n0 + nm), range(1, n0), p, true));
  }
  if (nf.order_used == 0) nf.order_used = opts.order;

  nf.reassembly_error = nf.measure_reassembly(48, opts.seed + 11);
  if (!(nf.reassembly_error <= opts.reassembly_tol))
    throw FactorizationResidual("reassembled field misses by " + format_double(nf.reassembly_error) +
                                " (relative) on the delta/2 ball");
  return nf;
}

ReducedSystem slow_reduce(const NormalForm& nf) {
  ReducedSystem rs;
  rs.dim = 1 + nf.n0;
  const NormalForm* p = &nf;
  rs.rhs = [p](const Vec& x) {
    double z = x[0];
    Vec u0v = x.tail(p->n0);
    Vec out(1 + p->n0);
    double g = p->n0 ? p->G_10(z, u0v).dot(u0v) : 0.0;
    out[0] = p->waive_slow ? g : z * g;
    if (p->n0) out.tail(p->n0) = p->G_01(z, u0v) * u0v;
    return out;
  };
  return rs;
}

}  // namespace smanifold
