#include "smanifold/integrate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace smanifold {

const char* param_name(Param p) { return p == Param::t ? "t" : "tau"; }

const char* verdict_name(DiffeoVerdict v) {
  switch (v) {
    case DiffeoVerdict::diffeo: return "diffeo";
    case DiffeoVerdict::not_diffeo: return "not_diffeo";
    default: return "inconclusive";
  }
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
  Vec y;
  Vec k;  // f(y), reused as the first stage of the next step
  Vec err;
};

StepResult dp_step(const VectorFn& f, const Vec& y, const Vec& k1, double h) {
  Vec k2 = f(y + h * a21 * k1);
  Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
  Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  StepResult r;
  r.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  r.k = f(r.y);
  r.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.k);
  return r;
}

double err_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    if (sc <= 0.0) sc = std::numeric_limits<double>::min();
    double q = err[i] / sc;
    acc += q * q;
  }
  double e = std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
  return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
}

double initial_step(const VectorFn& f, const Vec& y, const Vec& k, double rtol, double atol) {
  Vec sc = (atol + rtol * y.array().abs()).matrix();
  for (Eigen::Index i = 0; i < sc.size(); ++i)
    if (sc[i] <= 0.0) sc[i] = 1e-300;
  double d0 = (y.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
  double d1 = (k.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  Vec y1 = y + h0 * k;
  Vec k1 = f(y1);
  double d2 = ((k1 - k).array() / sc.array()).matrix().norm() / std::sqrt(double(y.size())) / h0;
  double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
  double h = std::min(100.0 * h0, h1);
  return std::isfinite(h) && h > 0.0 ? h : 1e-6;
}

double step_factor(double err) {
  if (err == 0.0) return 5.0;
  return std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
}

// Bisection for the first theta in (0, 1] with g(y(theta h)) >= 0, given g < 0 at theta = 0.
// y(theta h) is recomputed by a single step from the node, which keeps fifth-order accuracy.
std::pair<double, Vec> localize(const VectorFn& f, const Vec& y, const Vec& k, double h,
                                const std::function<double(const Vec&)>& g, const Vec& y_end) {
  double lo = 0.0, hi = 1.0;
  Vec y_hi = y_end;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    Vec ym = dp_step(f, y, k, mid * h).y;
    if (g(ym) >= 0.0) {
      hi = mid;
      y_hi = ym;
    } else {
      lo = mid;
    }
  }
  return {hi, y_hi};
}

double dudt_norm(const Vec& F, double zeta) {
  double z = std::abs(zeta);
  return z > 0.0 ? F.norm() / z : (F.norm() > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

struct Driver {
  const SingularSystem& sys;
  IntegrateOptions opts;
  Param mode;
  int n;
  VectorFn rhs;

  Driver(const SingularSystem& s, const IntegrateOptions& o, Param m) : sys(s), opts(o), mode(m), n(s.dim) {
    rhs = [this](const Vec& Y) {
      Vec out(n + 1);
      Vec u = Y.head(n);
      out.head(n) = eval_F(sys, u);
      out[n] = eval_zeta(sys, u);
      return out;
    };
  }

  Trajectory traj;

  void push_node(double tau, const Vec& Y, const Vec& K) {
    Vec u = Y.head(n);
    double z = K[n];
    if (mode == Param::tau) {
      traj.times.push_back(tau);
      traj.other.push_back(Y[n]);
      traj.derivs.push_back(K.head(n));
    } else {
      double t = Y[n];
      if (!traj.times.empty() && !(t > traj.times.back())) {
        // t stalls when zeta is tiny; keep the latest state.
        traj.states.back() = u;
        traj.derivs.back() = K.head(n) / z;
        traj.zetas.back() = z;
        traj.other.back() = tau;
        return;
      }
      traj.times.push_back(t);
      traj.other.push_back(tau);
      traj.derivs.push_back(K.head(n) / z);
    }
    traj.states.push_back(u);
    traj.zetas.push_back(z);
  }

  void add_event(const std::string& kind, double tau, const Vec& Y) {
    Event e;
    e.kind = kind;
    e.time = mode == Param::tau ? tau : Y[n];
    e.state = Y.head(n);
    e.detail = dudt_norm(eval_F(sys, e.state), eval_zeta(sys, e.state));
    traj.events.push_back(e);
  }

  double g_zeta(const Vec& Y) const { return opts.loc_tol - eval_zeta(sys, Y.head(n)); }
  double g_blow(const Vec& Y) const {
    Vec u = Y.head(n);
    double r = dudt_norm(eval_F(sys, u), eval_zeta(sys, u));
    if (r == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(r) - std::log(opts.blowup_threshold);
  }
  double g_ball(const Vec& Y) const { return Y.head(n).norm() - *opts.ball_radius; }

  Trajectory run(const Vec& u0, double end) {
    traj = Trajectory{};
    traj.param = mode;
    traj.dim = n;
    require_finite(u0, "initial datum");
    if (u0.size() != n) throw DimensionMismatch("initial datum has wrong length");
    Vec F0 = eval_F(sys, u0);
    double z0 = eval_zeta(sys, u0);
    if (mode == Param::t && !(z0 > 0.0))
      throw InvalidInitialDatum("zeta(u0) = " + std::to_string(z0) + " is not positive");

    Vec Y(n + 1);
    Y.head(n) = u0;
    Y[n] = 0.0;
    Vec K = rhs(Y);
    push_node(0.0, Y, K);

    if (F0.norm() <= opts.converged_tol * (1.0 + u0.norm())) {
      add_event("converged", 0.0, Y);
      // Constant trajectory up to the requested end.
      if (end > 0.0) {
        Vec Ye = Y;
        Ye[n] = mode == Param::t ? end : z0 * end;
        if (mode == Param::tau) {
          traj.times.push_back(end);
          traj.other.push_back(Ye[n]);
          traj.derivs.push_back(Vec::Zero(n));
        } else {
          traj.times.push_back(end);
          traj.other.push_back(z0 > 0.0 ? end / z0 : 0.0);
          traj.derivs.push_back(Vec::Zero(n));
        }
        traj.states.push_back(u0);
        traj.zetas.push_back(z0);
      }
      return traj;
    }

    double tau = 0.0;
    double h = opts.h_init > 0.0 ? opts.h_init : initial_step(rhs, Y, K, opts.rtol, opts.atol);
    if (mode == Param::tau) h = std::min(h, end);
    bool blow_done = g_blow(Y) >= 0.0;
    if (blow_done) add_event("derivative_blowup", 0.0, Y);
    bool zeta_below = g_zeta(Y) >= 0.0;
    bool zeta_terminal = false;
    long steps = 0;

    while (true) {
      if (mode == Param::tau && tau >= end) break;
      if (++steps > opts.max_steps) {
        add_event("step_underflow", tau, Y);
        break;
      }
      if (mode == Param::tau && tau + h > end) h = end - tau;
      StepResult st = dp_step(rhs, Y, K, h);
      double err = err_norm(st.err, Y, st.y, opts.rtol, opts.atol);
      if (!(err <= 1.0)) {
        h *= std::isfinite(err) ? step_factor(err) : 0.2;
        if (h < 1e-14 * std::max(1.0, std::abs(tau))) {
          add_event("step_underflow", tau, Y);
          break;
        }
        continue;
      }

      // Candidate events inside [tau, tau + h].
      struct Cand {
        double theta;
        Vec y;
        std::string kind;
        bool terminal;
      };
      std::vector<Cand> cands;
      auto check = [&](auto gfun, bool was_positive, const std::string& kind, bool terminal) {
        if (was_positive) return;
        if (gfun(st.y) >= 0.0) {
          auto [th, yy] = localize(rhs, Y, K, h, gfun, st.y);
          cands.push_back({th, yy, kind, terminal});
        }
      };
      check([this](const Vec& y) { return g_zeta(y); }, zeta_below, "zeta_zero", mode == Param::t);
      check([this](const Vec& y) { return g_blow(y); }, blow_done, "derivative_blowup", false);
      if (opts.ball_radius) check([this](const Vec& y) { return g_ball(y); }, false, "left_ball", true);
      if (mode == Param::t) {
        double t_end = end;
        check([this, t_end](const Vec& y) { return y[n] - t_end; }, false, "end", true);
      }
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.theta < b.theta; });

      const Cand* term = nullptr;
      for (const auto& c : cands)
        if (c.terminal) {
          term = &c;
          break;
        }
      for (const auto& c : cands) {
        if (term && c.theta > term->theta) break;
        if (c.kind == "end") continue;
        add_event(c.kind, tau + c.theta * h, c.y);
        if (c.kind == "derivative_blowup") blow_done = true;
        if (c.kind == "zeta_zero") zeta_terminal = mode == Param::t;
      }
      if (term) {
        double tt = tau + term->theta * h;
        Vec Yt = term->y;
        if (term->kind == "end") Yt[n] = end;
        push_node(tt, Yt, rhs(Yt));
        tau = tt;
        Y = Yt;
        break;
      }

      tau += h;
      Y = st.y;
      K = st.k;
      push_node(tau, Y, K);
      zeta_below = g_zeta(Y) >= 0.0;
      if (!blow_done && g_blow(Y) >= 0.0) blow_done = true;
      h *= step_factor(err);
    }

    if (zeta_terminal && !blow_done && opts.probe_blowup) probe(tau, Y);
    std::stable_sort(traj.events.begin(), traj.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    return traj;
  }

  // Past zeta = loc_tol the blow-up of dU/dt can still be resolved in tau with pure relative control.
  void probe(double tau, Vec Y) {
    Vec K = rhs(Y);
    double h = std::max(1e-12, initial_step(rhs, Y, K, opts.rtol, 1e-300));
    const double tau0 = tau;
    for (long s = 0; s < 200000; ++s) {
      StepResult st = dp_step(rhs, Y, K, h);
      double err = err_norm(st.err, Y, st.y, opts.rtol, 1e-300);
      if (!(err <= 1.0)) {
        h *= std::isfinite(err) ? step_factor(err) : 0.2;
        if (h < 1e-300) return;
        continue;
      }
      double z = st.k[n];
      if (!(z > 0.0)) return;
      if (g_blow(st.y) >= 0.0) {
        auto [th, yy] = localize(rhs, Y, K, h, [this](const Vec& y) { return g_blow(y); }, st.y);
        add_event("derivative_blowup", tau + th * h, yy);
        return;
      }
      tau += h;
      Y = st.y;
      K = st.k;
      if (tau - tau0 > 1e4) return;
      h *= step_factor(err);
    }
  }
};

}  // namespace

Trajectory integrate_tau(const SingularSystem& sys, const Vec& u0, double tau_end, const IntegrateOptions& opts) {
  if (!(tau_end >= 0.0)) throw Error("tau_end must be nonnegative");
  Driver d(sys, opts, Param::tau);
  return d.run(u0, tau_end);
}

Trajectory integrate_t(const SingularSystem& sys, const Vec& u0, double t_end, const IntegrateOptions& opts) {
  if (!(t_end >= 0.0)) throw Error("t_end must be nonnegative");
  Driver d(sys, opts, Param::t);
  return d.run(u0, t_end);
}

OdeSolution solve_ode(const VectorFn& f, const Vec& y0, double s_end, double rtol, double atol, long max_steps) {
  OdeSolution sol;
  Vec y = y0;
  Vec k = f(y);
  sol.s.push_back(0.0);
  sol.y.push_back(y);
  sol.dy.push_back(k);
  if (s_end <= 0.0) return sol;
  double s = 0.0;
  double h = std::min(s_end, initial_step(f, y, k, rtol, atol));
  long steps = 0;
  while (s < s_end) {
    if (++steps > max_steps) {
      sol.underflow = true;
      break;
    }
    if (s + h > s_end) h = s_end - s;
    StepResult st = dp_step(f, y, k, h);
    double err = err_norm(st.err, y, st.y, rtol, atol);
    if (!(err <= 1.0)) {
      h *= std::isfinite(err) ? step_factor(err) : 0.2;
      if (h < 1e-14 * std::max(1.0, s)) {
        sol.underflow = true;
        break;
      }
      continue;
    }
    s = (s + h >= s_end) ? s_end : s + h;
    y = st.y;
    k = st.k;
    sol.s.push_back(s);
    sol.y.push_back(y);
    sol.dy.push_back(k);
    h *= step_factor(err);
  }
  return sol;
}

namespace {

Vec hermite(double s0, double s1, const Vec& y0, const Vec& y1, const Vec* d0, const Vec* d1, double s) {
  double h = s1 - s0;
  double x = (s - s0) / h;
  if (!d0 || !d1) return (1.0 - x) * y0 + x * y1;
  double h00 = (1 + 2 * x) * (1 - x) * (1 - x);
  double h10 = x * (1 - x) * (1 - x);
  double h01 = x * x * (3 - 2 * x);
  double h11 = x * x * (x - 1);
  return h00 * y0 + h10 * h * *d0 + h01 * y1 + h11 * h * *d1;
}

size_t bracket(const std::vector<double>& times, double s) {
  auto it = std::upper_bound(times.begin(), times.end(), s);
  size_t i = it == times.begin() ? 0 : static_cast<size_t>(it - times.begin()) - 1;
  return std::min(i, times.size() - 2);
}

}  // namespace

Vec Trajectory::at(double s) const {
  if (times.empty()) throw Error("empty trajectory");
  if (times.size() == 1 || s <= times.front()) return states.front();
  if (s >= times.back()) return states.back();
  size_t i = bracket(times, s);
  bool d = derivs.size() == states.size();
  return hermite(times[i], times[i + 1], states[i], states[i + 1], d ? &derivs[i] : nullptr,
                 d ? &derivs[i + 1] : nullptr, s);
}

const Event* Trajectory::find_event(const std::string& kind) const {
  for (const auto& e : events)
    if (e.kind == kind) return &e;
  return nullptr;
}

Vec OdeSolution::at(double x) const {
  if (s.size() == 1 || x <= s.front()) return y.front();
  if (x >= s.back()) return y.back();
  size_t i = bracket(s, x);
  return hermite(s[i], s[i + 1], y[i], y[i + 1], &dy[i], &dy[i + 1], x);
}

namespace {

// Gauss-Kronrod 7-15 on [a, b].
constexpr double gk_x[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double gk_wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                             0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                             0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                             0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double gk_wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                             0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class Fn>
std::pair<double, double> gk15(const Fn& f, double a, double b) {
  double c = 0.5 * (a + b), hl = 0.5 * (b - a);
  double fc = f(c);
  double k = gk_wk[7] * fc, g = gk_wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    double dx = hl * gk_x[j];
    double s = f(c - dx) + f(c + dx);
    k += gk_wk[j] * s;
    if (j % 2 == 1) g += gk_wg[j / 2] * s;
  }
  return {k * hl, std::abs((k - g) * hl)};
}

template <class Fn>
double adaptive_gk(const Fn& f, double a, double b, double tol, int depth) {
  auto [val, err] = gk15(f, a, b);
  if (err <= tol || depth >= 30) return val;
  double m = 0.5 * (a + b);
  return adaptive_gk(f, a, m, 0.5 * tol, depth + 1) + adaptive_gk(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace

double RescaleMap::t_at(double s) const {
  if (tau.empty()) throw Error("empty rescale map");
  if (s <= tau.front()) return t.front();
  if (s >= tau.back()) return t.back();
  size_t i = bracket(tau, s);
  double x = (s - tau[i]) / (tau[i + 1] - tau[i]);
  return (1 - x) * t[i] + x * t[i + 1];
}

RescaleMap rescale(const Trajectory& traj, const SingularSystem& sys) {
  if (traj.param != Param::tau) throw Error("rescale needs a tau-parameterized trajectory");
  RescaleMap map;
  if (traj.times.empty()) return map;
  for (size_t i = 0; i < traj.size(); ++i) {
    double z = traj.zetas.size() == traj.size() ? traj.zetas[i] : eval_zeta(sys, traj.states[i]);
    if (!(z > 0.0)) throw NonPositiveZeta("zeta <= 0 at tau = " + format_double(traj.times[i]));
  }
  map.tau.push_back(traj.times[0]);
  map.t.push_back(0.0);
  double acc = 0.0;
  for (size_t i = 0; i + 1 < traj.size(); ++i) {
    double a = traj.times[i], b = traj.times[i + 1];
    auto zf = [&](double s) { return eval_zeta(sys, traj.at(s)); };
    acc += adaptive_gk(zf, a, b, 1e-12 * std::max(1.0, b - a), 0);
    map.tau.push_back(b);
    map.t.push_back(acc);
  }
  map.verdict = check_time_diffeo(traj, sys, traj.back_time());
  map.diverges = map.verdict == DiffeoVerdict::diffeo;
  return map;
}

DiffeoVerdict classify_zeta_tail(const std::vector<double>& tau, const std::vector<double>& zeta, double horizon) {
  std::vector<double> xs, ys;
  double lo = 0.75 * horizon;
  for (size_t i = 0; i < tau.size(); ++i)
    if (tau[i] >= lo && tau[i] <= horizon) {
      xs.push_back(tau[i]);
      ys.push_back(zeta[i]);
    }
  if (xs.size() < 4) return DiffeoVerdict::inconclusive;
  double m = *std::min_element(ys.begin(), ys.end());
  double L = xs.back() - xs.front();
  if (!(L > 0.0)) return DiffeoVerdict::inconclusive;
  auto fit = [](const std::vector<double>& x, const std::vector<double>& y, double& slope, double& r2) {
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      sxy += (x[i] - mx) * (y[i] - my);
      syy += (y[i] - my) * (y[i] - my);
    }
    slope = sxx > 0 ? sxy / sxx : 0.0;
    r2 = (sxx > 0 && syy > 0) ? sxy * sxy / (sxx * syy) : 1.0;
  };
  double slope, r2;
  fit(xs, ys, slope, r2);
  if (m > 0.0 && slope * L >= -1e-3 * m) return DiffeoVerdict::diffeo;
  if (m > 0.0) {
    std::vector<double> ly(ys.size());
    for (size_t i = 0; i < ys.size(); ++i) ly[i] = std::log(ys[i]);
    double rate, lr2;
    fit(xs, ly, rate, lr2);
    if (rate < 0.0 && lr2 >= 0.999 && rate * L <= -1.0) return DiffeoVerdict::not_diffeo;
  }
  return DiffeoVerdict::inconclusive;
}

DiffeoVerdict check_time_diffeo(const Trajectory& traj, const SingularSystem& sys, double horizon) {
  if (traj.param != Param::tau) throw Error("check_time_diffeo needs a tau-parameterized trajectory");
  if (traj.size() < 2) return DiffeoVerdict::inconclusive;
  double H = std::min(horizon, traj.back_time());
  std::vector<double> xs, zs;
  const int samples = 64;
  for (int i = 0; i <= samples; ++i) {
    double s = 0.75 * H + 0.25 * H * i / samples;
    xs.push_back(s);
    zs.push_back(eval_zeta(sys, traj.at(s)));
  }
  return classify_zeta_tail(xs, zs, H);
}

Trajectory pullback(const Trajectory& traj, const RescaleMap& map) {
  if (traj.param != Param::tau) throw Error("pullback needs a tau-parameterized trajectory");
  Trajectory out;
  out.param = Param::t;
  out.dim = traj.dim;
  out.events = traj.events;
  bool same_grid = map.tau.size() == traj.size();
  for (size_t i = 0; same_grid && i < traj.size(); ++i) same_grid = map.tau[i] == traj.times[i];
  for (size_t i = 0; i < traj.size(); ++i) {
    double t = same_grid ? map.t[i] : map.t_at(traj.times[i]);
    if (!out.times.empty() && !(t > out.times.back()))
      throw NotMonotone("t(tau) not strictly increasing at tau = " + format_double(traj.times[i]));
    out.times.push_back(t);
    out.other.push_back(traj.times[i]);
    out.states.push_back(traj.states[i]);
    double z = traj.zetas[i];
    out.zetas.push_back(z);
    if (traj.derivs.size() == traj.size()) out.derivs.push_back(traj.derivs[i] / z);
  }
  for (auto& e : out.events) e.time = map.t_at(e.time);
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "param,time";
  for (int i = 1; i <= traj.dim; ++i) out += ",u" + std::to_string(i);
  out += ",zeta\n";
  const char* p = param_name(traj.param);
  for (size_t k = 0; k < traj.size(); ++k) {
    out += p;
    out += ',' + format_double(traj.times[k]);
    for (int i = 0; i < traj.dim; ++i) out += ',' + format_double(traj.states[k][i]);
    out += ',' + format_double(traj.zetas[k]) + '\n';
  }
  for (const auto& e : traj.events) {
    out += "# event," + e.kind + ',' + format_double(e.time) + ',' + format_double(e.detail);
    for (int i = 0; i < traj.dim; ++i) out += ',' + format_double(e.state[i]);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  return out;
}

double parse_num(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw IoError("bad number '" + s + "' in trajectory file");
  return v;
}

}  // namespace

Trajectory trajectory_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw IoError("empty trajectory file");
  auto header = split_commas(line);
  if (header.size() < 3 || header[0] != "param" || header[1] != "time" || header.back() != "zeta")
    throw IoError("unexpected trajectory header");
  Trajectory tr;
  tr.dim = static_cast<int>(header.size()) - 3;
  bool param_set = false;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    if (line.rfind("# event,", 0) == 0) {
      auto f = split_commas(line.substr(8));
      if (static_cast<int>(f.size()) != 3 + tr.dim) throw IoError("malformed event line");
      Event e;
      e.kind = f[0];
      e.time = parse_num(f[1]);
      e.detail = parse_num(f[2]);
      e.state.resize(tr.dim);
      for (int i = 0; i < tr.dim; ++i) e.state[i] = parse_num(f[3 + i]);
      tr.events.push_back(e);
      continue;
    }
    auto f = split_commas(line);
    if (static_cast<int>(f.size()) != tr.dim + 3) throw IoError("malformed trajectory row");
    Param p = f[0] == "t" ? Param::t : Param::tau;
    if (f[0] != "t" && f[0] != "tau") throw IoError("unknown parameterization '" + f[0] + "'");
    if (param_set && p != tr.param) throw IoError("mixed parameterizations");
    tr.param = p;
    param_set = true;
    tr.times.push_back(parse_num(f[1]));
    Vec u(tr.dim);
    for (int i = 0; i < tr.dim; ++i) u[i] = parse_num(f[2 + i]);
    tr.states.push_back(u);
    tr.zetas.push_back(parse_num(f.back()));
  }
  return tr;
}

std::string trajectory_to_json(const Trajectory& traj) {
  nlohmann::ordered_json j;
  j["param"] = param_name(traj.param);
  std::vector<std::string> cols{"time"};
  for (int i = 1; i <= traj.dim; ++i) cols.push_back("u" + std::to_string(i));
  cols.push_back("zeta");
  j["columns"] = cols;
  nlohmann::json rows = nlohmann::json::array();
  for (size_t k = 0; k < traj.size(); ++k) {
    std::vector<double> r{traj.times[k]};
    for (int i = 0; i < traj.dim; ++i) r.push_back(traj.states[k][i]);
    r.push_back(traj.zetas[k]);
    rows.push_back(r);
  }
  j["nodes"] = rows;
  nlohmann::ordered_json evs = nlohmann::ordered_json::array();
  for (const auto& e : traj.events) {
    nlohmann::ordered_json je;
    je["kind"] = e.kind;
    je["time"] = e.time;
    je["detail"] = e.detail;
    je["state"] = std::vector<double>(e.state.data(), e.state.data() + e.state.size());
    evs.push_back(je);
  }
  j["events"] = evs;
  return j.dump(2) + "\n";
}

Trajectory trajectory_from_json(const std::string& text) {
  Trajectory tr;
  try {
    auto j = nlohmann::json::parse(text);
    std::string p = j.at("param").get<std::string>();
    tr.param = p == "t" ? Param::t : Param::tau;
    tr.dim = static_cast<int>(j.at("columns").size()) - 2;
    for (const auto& r : j.at("nodes")) {
      auto v = r.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != tr.dim + 2) throw IoError("malformed node");
      tr.times.push_back(v[0]);
      tr.states.push_back(Eigen::Map<Vec>(v.data() + 1, tr.dim));
      tr.zetas.push_back(v.back());
    }
    for (const auto& je : j.at("events")) {
      Event e;
      e.kind = je.at("kind").get<std::string>();
      e.time = je.at("time").get<double>();
      e.detail = je.at("detail").get<double>();
      auto s = je.at("state").get<std::vector<double>>();
      e.state = Eigen::Map<Vec>(s.data(), static_cast<Eigen::Index>(s.size()));
      tr.events.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed trajectory JSON: ") + e.what());
  }
  return tr;
}

}  // namespace smanifold
