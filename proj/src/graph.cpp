#include "smanifold/graph.hpp"

#include <algorithm>
#include <cmath>

namespace smanifold {

namespace {

void enumerate(int nvars, int degree, int pos, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (pos == nvars - 1) {
    cur[pos] = degree;
    out.push_back(cur);
    return;
  }
  for (int k = degree; k >= 0; --k) {
    cur[pos] = k;
    enumerate(nvars, degree - k, pos + 1, cur, out);
  }
}

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

MonomialBasis MonomialBasis::make(int nvars, int min_degree, int max_degree,
                                  const std::function<bool(const std::vector<int>&)>& keep) {
  MonomialBasis b;
  b.nvars = nvars;
  if (nvars <= 0) return b;
  std::vector<int> cur(nvars, 0);
  for (int d = std::max(0, min_degree); d <= max_degree; ++d) {
    std::vector<std::vector<int>> all;
    enumerate(nvars, d, 0, cur, all);
    for (auto& e : all)
      if (!keep || keep(e)) b.exps.push_back(e);
  }
  return b;
}

Vec MonomialBasis::eval(const Vec& x) const {
  Vec m(size());
  for (int j = 0; j < size(); ++j) {
    double v = 1.0;
    for (int i = 0; i < nvars; ++i) v *= ipow(x[i], exps[j][i]);
    m[j] = v;
  }
  return m;
}

Mat MonomialBasis::jac(const Vec& x) const {
  Mat d = Mat::Zero(size(), nvars);
  for (int j = 0; j < size(); ++j) {
    for (int k = 0; k < nvars; ++k) {
      int ek = exps[j][k];
      if (ek == 0) continue;
      double v = ek * ipow(x[k], ek - 1);
      for (int i = 0; i < nvars; ++i)
        if (i != k) v *= ipow(x[i], exps[j][i]);
      d(j, k) = v;
    }
  }
  return d;
}

Vec PolyGraph::eval(const Vec& x) const {
  Vec y = Vec::Zero(n_fiber);
  if (L.size()) y += L * x;
  if (basis.size() && C.size()) y += C * basis.eval(x / scale);
  return y;
}

Mat PolyGraph::jac(const Vec& x) const {
  Mat d = Mat::Zero(n_fiber, n_base);
  if (L.size()) d += L;
  if (basis.size() && C.size()) d += C * basis.jac(x / scale) / scale;
  return d;
}

Vec sample_unit_sphere(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(n);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    norm = v.norm();
  }
  return v / norm;
}

Vec sample_ball(int n, double r, std::mt19937_64& rng) {
  if (n == 0) return Vec(0);
  Vec dir = sample_unit_sphere(n, rng);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double rho = r * std::pow(ud(rng), 1.0 / n);
  return dir * rho;
}

namespace {

struct PointEval {
  Vec r;      // residual
  Vec fb;
  Vec ff;
};

PointEval residual_at(const GraphProblem& p, const PolyGraph& g, const Vec& xb) {
  PointEval out;
  Vec yf = g.eval(xb);
  p.field(xb, yf, out.fb, out.ff);
  out.r = g.jac(xb) * out.fb - out.ff;
  return out;
}

}  // namespace

GraphFit fit_invariant_graph(const GraphProblem& p) {
  GraphFit fit;
  PolyGraph& g = fit.graph;
  g.n_base = p.n_base;
  g.n_fiber = p.n_fiber;
  g.L = p.L.size() ? p.L : Mat::Zero(p.n_fiber, p.n_base);
  g.scale = p.radius > 0 ? p.radius : 1.0;
  g.basis = MonomialBasis::make(p.n_base, p.min_degree, p.order, p.keep);
  const int nmon = g.basis.size();
  const int nf = p.n_fiber;
  g.C = Mat::Zero(nf, nmon);
  if (nf == 0 || p.n_base == 0) return fit;

  std::mt19937_64 rng(p.seed);
  const int npts = p.n_points > 0 ? p.n_points : std::max(3 * nmon + 40, 60);
  std::vector<Vec> pts;
  pts.reserve(npts);
  for (int i = 0; i < npts; ++i) pts.push_back(sample_ball(p.n_base, p.radius, rng));

  const int nunk = nf * nmon;
  if (nunk > 0) {
    double prev = INFINITY;
    for (int it = 0; it < 15; ++it) {
      Mat J = Mat::Zero(npts * nf, nunk);
      Vec R(npts * nf);
      for (int k = 0; k < npts; ++k) {
        const Vec& xb = pts[k];
        Vec xs = xb / g.scale;
        Vec m = g.basis.eval(xs);
        Mat mj = g.basis.jac(xs) / g.scale;
        Vec yf = g.eval(xb);
        Vec fb, ff;
        p.field(xb, yf, fb, ff);
        Mat dy = g.jac(xb);
        R.segment(k * nf, nf) = dy * fb - ff;
        // d(field)/d(y_f) by central differences
        Mat jb(p.n_base, nf), jf(nf, nf);
        for (int i = 0; i < nf; ++i) {
          double h = 1e-6 * std::max(1.0, std::abs(yf[i]));
          Vec yp = yf, ym = yf;
          yp[i] += h;
          ym[i] -= h;
          Vec fbp, ffp, fbm, ffm;
          p.field(xb, yp, fbp, ffp);
          p.field(xb, ym, fbm, ffm);
          jb.col(i) = (fbp - fbm) / (2 * h);
          jf.col(i) = (ffp - ffm) / (2 * h);
        }
        Mat K = dy * jb - jf;
        Vec mfb = mj * fb;
        for (int j = 0; j < nmon; ++j) {
          for (int i = 0; i < nf; ++i) {
            int col = i + nf * j;
            J.block(k * nf, col, nf, 1) = K.col(i) * m[j];
            J(k * nf + i, col) += mfb[j];
          }
        }
      }
      double rn = R.norm();
      Vec colscale(nunk);
      for (int c = 0; c < nunk; ++c) {
        double s = J.col(c).norm();
        colscale[c] = s > 0 ? s : 1.0;
        J.col(c) /= colscale[c];
      }
      Eigen::ColPivHouseholderQR<Mat> qr(J);
      Vec d = qr.solve(-R);
      d = d.cwiseQuotient(colscale);
      const Mat& rr = qr.matrixR();
      int rank = std::min<int>(J.rows(), J.cols());
      double r0 = std::abs(rr(0, 0)), rmin = std::abs(rr(rank - 1, rank - 1));
      fit.cond = rmin > 0 ? r0 / rmin : INFINITY;
      for (int j = 0; j < nmon; ++j)
        for (int i = 0; i < nf; ++i) g.C(i, j) += d[i + nf * j];
      fit.iterations = it + 1;
      double dn = d.lpNorm<Eigen::Infinity>();
      if (dn <= 1e-13 * (1.0 + g.C.lpNorm<Eigen::Infinity>())) break;
      if (it > 2 && rn >= 0.999 * prev) break;
      prev = rn;
    }
    fit.resonance_warning = fit.cond > 1e10;
  }

  std::mt19937_64 vrng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  double mx = 0.0, ss = 0.0, fs = 0.0;
  const int nval = std::max(50, npts / 2);
  for (int k = 0; k < nval; ++k) {
    Vec xb = sample_ball(p.n_base, p.radius, vrng);
    PointEval e = residual_at(p, g, xb);
    mx = std::max(mx, e.r.lpNorm<Eigen::Infinity>());
    ss += e.r.squaredNorm();
    fs = std::max({fs, e.fb.lpNorm<Eigen::Infinity>(), e.ff.lpNorm<Eigen::Infinity>()});
  }
  fit.residual_max = mx;
  fit.residual_rms = std::sqrt(ss / (nval * nf));
  fit.field_scale = fs;
  return fit;
}

}  // namespace smanifold
