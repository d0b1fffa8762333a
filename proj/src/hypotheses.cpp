#include "smanifold/hypotheses.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

#include "smanifold/graph.hpp"
#include "smanifold/integrate.hpp"
#include "smanifold/manifolds.hpp"

namespace smanifold {

const char* status_name(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    default: return "inconclusive";
  }
}

namespace {

double effective_radius(const SingularSystem& sys, const CheckConfig& cfg) {
  if (!(cfg.radius > 0) || cfg.n_samples < 1) throw InvalidState("check config needs radius > 0 and n_samples >= 1");
  double r = cfg.radius;
  if (sys.cutoff_delta) r = std::min(r, *sys.cutoff_delta);
  return r;
}

HypothesisRecord make_record(const std::string& id) {
  HypothesisRecord r;
  r.id = id;
  return r;
}

// Zero of s -> zeta(p + s d) in [-span, span] by bisection, if the sign changes.
std::optional<Vec> bisect_line(const SingularSystem& sys, const Vec& p, const Vec& d, double span) {
  double a = -span, b = span;
  double za = eval_zeta(sys, p + a * d), zb = eval_zeta(sys, p + b * d);
  if (za == 0.0) return Vec(p + a * d);
  if (zb == 0.0) return Vec(p + b * d);
  if ((za > 0) == (zb > 0)) {
    // Try the half lines from p separately; zeta may have an even number of roots.
    double z0 = eval_zeta(sys, p);
    if (z0 == 0.0) return p;
    if ((z0 > 0) != (za > 0)) {
      b = 0.0;
      zb = z0;
    } else if ((z0 > 0) != (zb > 0)) {
      a = 0.0;
      za = z0;
    } else {
      return std::nullopt;
    }
  }
  for (int i = 0; i < 60; ++i) {
    double m = 0.5 * (a + b);
    double zm = eval_zeta(sys, p + m * d);
    if (zm == 0.0) return Vec(p + m * d);
    if ((zm > 0) == (za > 0)) {
      a = m;
      za = zm;
    } else {
      b = m;
    }
  }
  double m = std::abs(za) < std::abs(eval_zeta(sys, p + b * d)) ? a : b;
  return Vec(p + m * d);
}

// Gauss-Newton with minimum-norm steps for the square-or-not system r(x) = 0.
bool min_norm_newton(const std::function<Vec(const Vec&)>& r, const std::function<Mat(const Vec&)>& jr, Vec& x,
                     double tol, int max_iter = 30) {
  for (int it = 0; it < max_iter; ++it) {
    Vec res = r(x);
    if (res.norm() <= tol) return true;
    Mat J = jr(x);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
    Vec dx = cod.solve(-res);
    if (!dx.allFinite()) return false;
    x += dx;
    if (dx.norm() < 1e-16 * (1.0 + x.norm())) break;
  }
  return r(x).norm() <= tol;
}

Mat kernel_basis(const Mat& m, double tol) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > tol) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

}  // namespace

std::vector<Vec> sample_singular_set(const SingularSystem& sys, double radius, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> out;
  const int N = sys.dim;
  Vec g0 = eval_grad_zeta(sys, Vec::Zero(N));
  for (int attempt = 0; attempt < 40 * n && static_cast<int>(out.size()) < n; ++attempt) {
    Vec p = sample_ball(N, radius, rng);
    Vec d = g0.norm() > 1e-12 ? Vec(g0.normalized()) : sample_unit_sphere(N, rng);
    auto z = bisect_line(sys, p, d, 2.0 * radius);
    if (!z || z->norm() > radius) continue;
    if (std::abs(eval_zeta(sys, *z)) > 1e-12) continue;
    out.push_back(*z);
  }
  return out;
}

HypothesisRecord check_h1(const SingularSystem& sys, const Vec& u0, const CheckConfig& cfg) {
  if (u0.size() != sys.dim) throw DimensionMismatch("u0 has wrong length");
  auto r = make_record("H1");
  double z = eval_zeta(sys, u0);
  r.tolerance = cfg.tol_eq;
  r.max_residual = z;
  r.samples_used = 1;
  if (z > cfg.tol_eq) {
    r.status = Status::pass;
  } else {
    r.status = Status::fail;
    r.witness = u0;
    r.note = "zeta(u0) is not positive";
  }
  return r;
}

HypothesisRecord check_h2(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H2");
  if (!sys.cutoff_delta) {
    r.note = "no cutoff configured";
    return r;
  }
  double d = *sys.cutoff_delta;
  std::mt19937_64 rng(cfg.rng_seed + 2);
  std::uniform_real_distribution<double> ud(2.0 * d, 3.0 * d);
  r.status = Status::pass;
  for (int i = 0; i < cfg.n_samples; ++i) {
    Vec u = sample_unit_sphere(sys.dim, rng) * ud(rng);
    double m = eval_F(sys, u).lpNorm<Eigen::Infinity>();
    ++r.samples_used;
    if (m > r.max_residual) r.max_residual = m;
    if (m != 0.0) {
      r.status = Status::fail;
      r.witness = u;
      r.note = "field is not exactly zero beyond 2 delta";
      break;
    }
  }
  return r;
}

HypothesisRecord check_h3_neg(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H3");
  Vec o = Vec::Zero(sys.dim);
  double f0 = eval_F(sys, o).norm();
  if (f0 > cfg.tol_eq) throw NotEquilibrium("F(0) = " + format_double(f0) + " exceeds tolerance");
  Mat J = jacobian_F(sys, o);
  SpectralSplit sp = spectral_split(J);
  r.samples_used = 1;
  r.tolerance = sp.tol_spectral;
  double mx = -INFINITY;
  for (int i = 0; i < sp.eigenvalues.size(); ++i) mx = std::max(mx, sp.eigenvalues[i].real());
  r.max_residual = mx;
  if (sp.n_plus == 0) {
    r.status = Status::pass;
  } else {
    r.status = Status::fail;
    r.witness = o;
    r.note = std::to_string(sp.n_plus) + " eigenvalue(s) with positive real part";
  }
  return r;
}

HypothesisRecord check_h4_sur(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H4");
  Vec o = Vec::Zero(sys.dim);
  double g = eval_grad_zeta(sys, o).norm();
  r.max_residual = g;
  r.tolerance = cfg.tol_eq;
  r.samples_used = 1;
  if (g > cfg.tol_eq) {
    r.status = Status::pass;
  } else {
    r.status = Status::fail;
    r.witness = o;
    r.note = "grad zeta vanishes at the origin";
  }
  return r;
}

namespace {

struct CenterSPoints {
  std::vector<Vec> points;
  double graph_residual = 0.0;
};

CenterSPoints center_singular_points(const SingularSystem& sys, const CheckConfig& cfg, double radius) {
  CenterSPoints out;
  CenterGraph cg = center_graph(sys, cfg.center_order, radius);
  out.graph_residual = cg.residual;
  const int nc = cg.n_center;
  if (nc == 0) return out;
  Vec g = cg.basis_center.transpose() * eval_grad_zeta(sys, Vec::Zero(sys.dim));
  std::mt19937_64 rng(cfg.rng_seed + 5);
  auto zeta_on_graph = [&](const Vec& x) { return eval_zeta(sys, cg.point(x)); };
  for (int attempt = 0; attempt < 40 * cfg.n_samples && static_cast<int>(out.points.size()) < cfg.n_samples;
       ++attempt) {
    Vec p = sample_ball(nc, radius, rng);
    Vec d = g.norm() > 1e-12 ? Vec(g.normalized()) : sample_unit_sphere(nc, rng);
    double a = -2.0 * radius, b = 2.0 * radius;
    double za = zeta_on_graph(p + a * d), zb = zeta_on_graph(p + b * d);
    if ((za > 0) == (zb > 0) && za != 0.0 && zb != 0.0) continue;
    for (int i = 0; i < 60; ++i) {
      double m = 0.5 * (a + b);
      double zm = zeta_on_graph(p + m * d);
      if (zm == 0.0) {
        a = b = m;
        break;
      }
      if ((zm > 0) == (za > 0)) {
        a = m;
        za = zm;
      } else {
        b = m;
      }
    }
    Vec u = cg.point(p + 0.5 * (a + b) * d);
    if (u.norm() > radius) continue;
    out.points.push_back(u);
  }
  return out;
}

}  // namespace

HypothesisRecord check_h5_center(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H5");
  double radius = effective_radius(sys, cfg);
  CenterSPoints cs = center_singular_points(sys, cfg, radius);
  r.samples_used = static_cast<int>(cs.points.size());
  if (cs.points.empty()) {
    r.note = "no point of the center manifold on the singular set within radius";
    return r;
  }
  r.status = Status::pass;
  double worst_excess = -INFINITY;
  for (const Vec& u : cs.points) {
    double f = eval_F(sys, u).norm();
    double tol = cfg.tol_eq * (1.0 + f) + 10.0 * cs.graph_residual;
    if (f - tol > worst_excess) {
      worst_excess = f - tol;
      r.tolerance = tol;
    }
    if (f > r.max_residual) r.max_residual = f;
    if (f > tol && (!r.witness || f >= eval_F(sys, *r.witness).norm())) {
      r.status = Status::fail;
      r.witness = u;
      r.tolerance = tol;
    }
  }
  if (r.status == Status::fail) r.note = "center manifold point on the singular set is not an equilibrium";
  return r;
}

HypothesisRecord check_h6_tras(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H6");
  const int N = sys.dim;
  double radius = effective_radius(sys, cfg);
  Vec o = Vec::Zero(N);
  Mat J0 = jacobian_F(sys, o);
  double ktol = 1e-8 * (1.0 + J0.norm());
  Mat K = kernel_basis(J0, ktol);
  Vec g0 = eval_grad_zeta(sys, o);
  r.tolerance = cfg.tol_eq;
  if (K.cols() == 0) {
    Eigen::JacobiSVD<Mat> svd(J0);
    r.status = Status::fail;
    r.witness = o;
    r.max_residual = svd.singularValues().minCoeff();
    r.note = "DF(0) is invertible: the origin is an isolated equilibrium";
    return r;
  }
  Vec a = K.transpose() * g0;
  double gn = g0.norm();
  if (a.norm() <= cfg.tol_eq * (1.0 + gn)) {
    r.status = Status::fail;
    r.witness = o;
    r.max_residual = 1.0 - a.norm() / std::max(gn, 1e-300);
    r.note = "every equilibrium direction is tangent to the singular set";
    return r;
  }
  Vec t = K * a;
  t.normalize();

  // Pseudo-arclength style continuation of F = 0 from the origin along t.
  auto transversality = [&](const Vec& u, const Vec& tan) {
    Vec g = eval_grad_zeta(sys, u);
    return std::abs(g.dot(tan)) / std::max(g.norm(), 1e-300);
  };
  double best = transversality(o, t);
  Vec u = o;
  double s = radius / 10.0;
  int found = 0;
  bool stalled = false;
  while (u.norm() < 0.5 * radius && found < 20) {
    Vec pred = u + s * t;
    Vec x = pred;
    Vec tt = t;
    auto res = [&](const Vec& y) {
      Vec out(N + 1);
      out.head(N) = eval_F(sys, y);
      out[N] = tt.dot(y - pred);
      return out;
    };
    auto jres = [&](const Vec& y) {
      Mat out(N + 1, N);
      out.topRows(N) = jacobian_F(sys, y);
      out.row(N) = tt.transpose();
      return out;
    };
    double ftol = 1e-12 * (1.0 + J0.norm());
    if (!min_norm_newton(res, jres, x, ftol)) {
      s *= 0.5;
      if (s < radius * 1e-4) {
        stalled = true;
        break;
      }
      continue;
    }
    Vec step = x - u;
    Mat Kx = kernel_basis(jacobian_F(sys, x), 1e-6 * (1.0 + J0.norm()));
    Vec tn = Kx.cols() > 0 ? Vec(Kx * (Kx.transpose() * t)) : step;
    if (tn.norm() < 1e-14) tn = step;
    tn.normalize();
    if (tn.dot(t) < 0) tn = -tn;
    t = tn;
    u = x;
    ++found;
    best = std::min(best, transversality(u, t));
  }
  r.samples_used = found;
  r.max_residual = 1.0 - best;
  if (found >= 3 && best > cfg.tol_eq) {
    r.status = Status::pass;
  } else if (found >= 3) {
    r.status = Status::fail;
    r.witness = u;
    r.note = "equilibrium curve becomes tangent to the singular set";
  } else {
    r.note = stalled ? "continuation stalled" : "continuation produced too few points";
  }
  return r;
}

HypothesisRecord check_h7_fast(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H7");
  double radius = effective_radius(sys, cfg);
  auto pts = sample_singular_set(sys, radius, cfg.n_samples, cfg.rng_seed + 7);
  r.samples_used = static_cast<int>(pts.size());
  if (pts.empty()) {
    r.note = "no singular point found within radius";
    return r;
  }
  r.status = Status::pass;
  double worst = -INFINITY;
  for (const Vec& u : pts) {
    Vec f = eval_F(sys, u);
    double v = std::abs(eval_grad_zeta(sys, u).dot(f));
    double tol = cfg.tol_eq * (1.0 + f.norm());
    if (v > r.max_residual) r.max_residual = v;
    if (v - tol > worst) {
      worst = v - tol;
      r.tolerance = tol;
      if (v > tol) {
        r.status = Status::fail;
        r.witness = u;
      }
    }
  }
  if (r.status == Status::fail) r.note = "grad zeta . F does not vanish on the singular set";
  return r;
}

namespace {

double g_transverse(const SingularSystem& sys, const Vec& u, double h) {
  Vec g = eval_grad_zeta(sys, u);
  Vec n = g / g.squaredNorm();
  auto phi = [&](double s) {
    Vec v = u + s * n;
    return eval_grad_zeta(sys, v).dot(eval_F(sys, v));
  };
  double p0 = phi(0.0);
  double d1 = (phi(h) - p0) / h;
  double d2 = (phi(0.5 * h) - p0) / (0.5 * h);
  return 2.0 * d2 - d1;
}

}  // namespace

HypothesisRecord check_h8_slow(const SingularSystem& sys, const CheckConfig& cfg) {
  auto r = make_record("H8");
  const int N = sys.dim;
  double radius = effective_radius(sys, cfg);
  std::vector<Vec> starts{Vec::Zero(N)};
  try {
    CenterSPoints cs = center_singular_points(sys, cfg, radius);
    for (auto& p : cs.points) starts.push_back(p);
  } catch (const Error&) {
  }
  auto res = [&](const Vec& y) {
    Vec out(N + 1);
    out.head(N) = eval_F(sys, y);
    out[N] = eval_zeta(sys, y);
    return out;
  };
  auto jres = [&](const Vec& y) {
    Mat out(N + 1, N);
    out.topRows(N) = jacobian_F(sys, y);
    out.row(N) = eval_grad_zeta(sys, y).transpose();
    return out;
  };
  std::vector<Vec> eqs;
  for (Vec x : starts) {
    if (!min_norm_newton(res, jres, x, 1e-13)) continue;
    if (x.norm() > radius) continue;
    eqs.push_back(x);
  }
  r.samples_used = static_cast<int>(eqs.size());
  if (eqs.empty()) {
    r.note = "no equilibrium on the singular set";
    return r;
  }
  r.status = Status::pass;
  double h = 1e-4 * radius;
  double worst = -INFINITY;
  for (const Vec& u : eqs) {
    double G = std::abs(g_transverse(sys, u, h));
    double tol = cfg.tol_eq * (1.0 + jacobian_F(sys, u).norm());
    if (G > r.max_residual) r.max_residual = G;
    if (G - tol > worst) {
      worst = G - tol;
      r.tolerance = tol;
      if (G > tol) {
        r.status = Status::fail;
        r.witness = u;
      }
    }
  }
  if (r.status == Status::fail) r.note = "G does not vanish at an equilibrium on the singular set";
  return r;
}

const HypothesisRecord& HypothesisReport::get(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  throw InvalidState("no record " + id);
}

std::vector<std::string> HypothesisReport::failed() const {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (r.status == Status::fail && r.id != "H1" && r.id != "H2") out.push_back(r.id);
  return out;
}

std::string HypothesisReport::to_json() const {
  nlohmann::ordered_json j;
  j["system"] = system;
  j["overall"] = status_name(overall);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json e;
    e["hypothesis"] = r.id;
    e["status"] = status_name(r.status);
    if (r.witness) {
      std::vector<double> w(r.witness->data(), r.witness->data() + r.witness->size());
      e["witness"] = w;
    } else {
      e["witness"] = nullptr;
    }
    e["residual"] = std::isfinite(r.max_residual) ? nlohmann::ordered_json(r.max_residual) : nullptr;
    e["tolerance"] = r.tolerance;
    e["samples"] = r.samples_used;
    if (!r.note.empty()) e["note"] = r.note;
    arr.push_back(e);
  }
  j["hypotheses"] = arr;
  return j.dump(2);
}

HypothesisReport check_all(const SingularSystem& sys, const std::optional<Vec>& u0, const CheckConfig& cfg) {
  HypothesisReport rep;
  rep.system = sys.name;
  if (u0) {
    rep.records.push_back(check_h1(sys, *u0, cfg));
  } else {
    auto r = make_record("H1");
    r.note = "no initial datum given";
    rep.records.push_back(r);
  }
  rep.records.push_back(check_h2(sys, cfg));

  bool h3_ok = false, h4_ok = false;
  try {
    auto r = check_h3_neg(sys, cfg);
    h3_ok = r.status == Status::pass;
    rep.records.push_back(r);
  } catch (const NotEquilibrium& e) {
    auto r = make_record("H3");
    r.status = Status::fail;
    r.witness = Vec::Zero(sys.dim);
    r.max_residual = eval_F(sys, *r.witness).norm();
    r.tolerance = cfg.tol_eq;
    r.note = e.what();
    rep.records.push_back(r);
  }
  {
    auto r = check_h4_sur(sys, cfg);
    h4_ok = r.status == Status::pass;
    rep.records.push_back(r);
  }
  auto guarded = [&](const std::string& id, auto&& fn, bool pre) {
    if (!pre) {
      auto r = make_record(id);
      r.note = "requires H3 and H4";
      rep.records.push_back(r);
      return;
    }
    try {
      rep.records.push_back(fn());
    } catch (const Error& e) {
      auto r = make_record(id);
      r.note = e.what();
      rep.records.push_back(r);
    }
  };
  guarded("H5", [&] { return check_h5_center(sys, cfg); }, h3_ok && h4_ok);
  guarded("H6", [&] { return check_h6_tras(sys, cfg); }, true);
  guarded("H7", [&] { return check_h7_fast(sys, cfg); }, h4_ok);
  guarded("H8", [&] { return check_h8_slow(sys, cfg); }, h3_ok && h4_ok);

  bool any_fail = false, all_pass = true;
  for (const auto& r : rep.records) {
    if (r.id == "H1" || r.id == "H2") continue;
    if (r.status == Status::fail) any_fail = true;
    if (r.status != Status::pass) all_pass = false;
  }
  rep.overall = all_pass ? Status::pass : (any_fail ? Status::fail : Status::inconclusive);
  return rep;
}

RescaleEquivalence rescale_equivalence_test(const SingularSystem& sys, const ScalarField& f, const CheckConfig& cfg) {
  RescaleEquivalence out;
  out.rescaled = rescale_system(sys, f);
  out.original = check_all(sys, std::nullopt, cfg);
  out.transformed = check_all(out.rescaled, std::nullopt, cfg);
  out.same_pattern = true;
  for (size_t i = 0; i < out.original.records.size(); ++i)
    if (out.original.records[i].status != out.transformed.records[i].status) out.same_pattern = false;
  return out;
}

}  // namespace smanifold
