#include <catch_amalgamated.hpp>

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "smanifold/examples.hpp"
#include "smanifold/integrate.hpp"
#include "smanifold/system_io.hpp"

using namespace smanifold;
using Catch::Approx;

namespace {
IntegrateOptions tol(double rtol) {
  IntegrateOptions io;
  io.rtol = rtol;
  io.atol = rtol * 1e-2;
  return io;
}

// example-ok in tau: u2 = b e^{-tau}, u1 = a exp(-b (1 - e^{-tau}))
Vec ok_tau(double a, double b, double tau) {
  return make_state({a * std::exp(-b * (1 - std::exp(-tau))), b * std::exp(-tau)});
}
}  // namespace

TEST_CASE("tau integration matches closed form") {
  Trajectory tr = integrate_tau(make_example_ok(), make_state({1, 0.5}), 20.0, tol(1e-12));
  CHECK(tr.param == Param::tau);
  CHECK(tr.back_time() == Approx(20.0));
  CHECK(tr.events.empty());
  double worst = 0;
  for (size_t i = 0; i < tr.size(); ++i) {
    worst = std::max(worst, (tr.states[i] - ok_tau(1, 0.5, tr.times[i])).norm());
    CHECK(tr.zetas[i] == tr.states[i][0]);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("error shrinks with rtol") {
  double prev = 1.0;
  for (double r : {1e-6, 1e-8, 1e-10, 1e-12}) {
    Trajectory tr = integrate_tau(make_example_ok(), make_state({1, 2}), 10.0, tol(r));
    double err = (tr.states.back() - ok_tau(1, 2, tr.back_time())).norm();
    CHECK(err < 100 * r);
    CHECK(err <= prev);
    prev = err;
  }
}

TEST_CASE("linear toy against the matrix exponential") {
  ToyLinearModel m = default_toy_model();
  for (double z0 : {1.0, 0.3}) {
    SingularSystem sys = make_toy_fixed(m, z0);
    Vec v0 = make_state({0.4, -0.7});
    Trajectory tr = integrate_tau(sys, v0, 5.0, tol(1e-12));
    Mat A = m.A_s + z0 * m.A_ns;
    for (size_t i = 0; i < tr.size(); i += 7)
      CHECK((tr.states[i] - (A * tr.times[i]).exp() * v0).norm() < 1e-9);
    Trajectory tt = integrate_t(sys, v0, 2.0, tol(1e-12));
    Mat B = m.A_s / z0 + m.A_ns;
    CHECK((tt.states.back() - (B * 2.0).exp() * v0).norm() < 1e-9);
  }
}

TEST_CASE("equilibrium start emits converged and stays put") {
  Vec u0 = make_state({1, 0});
  Trajectory tr = integrate_tau(make_example_ok(), u0, 5.0);
  REQUIRE(tr.find_event("converged"));
  CHECK(tr.find_event("converged")->time == 0);
  for (const auto& s : tr.states) CHECK((s - u0).norm() == 0);
}

TEST_CASE("zeta_zero event in t, closed form time") {
  for (double u2 : {0.6, 1.0, 1.4}) {
    Vec u0 = make_state({0.5, u2});
    Trajectory tr = integrate_t(make_example_fast(), u0, 2.0, tol(1e-12));
    const Event* e = tr.find_event("zeta_zero");
    REQUIRE(e);
    CHECK(e->time == Approx(fast_singular_time(u0)).margin(1e-9));
    CHECK(tr.back_time() == Approx(e->time).margin(1e-12));
  }
  CHECK_THROWS_AS(integrate_t(make_example_fast(), make_state({-0.5, 1}), 1.0), InvalidInitialDatum);
  CHECK_THROWS_AS(integrate_t(make_example_fast(), make_state({0, 1}), 1.0), InvalidInitialDatum);
}

TEST_CASE("event time converges with loc_tol") {
  Vec u0 = make_state({0.5, 1});
  double exact = fast_singular_time(u0);
  IntegrateOptions a = tol(1e-12), b = tol(1e-12);
  a.loc_tol = 1e-6;
  b.loc_tol = 1e-12;
  double ea = std::abs(integrate_t(make_example_fast(), u0, 2.0, a).find_event("zeta_zero")->time - exact);
  double eb = std::abs(integrate_t(make_example_fast(), u0, 2.0, b).find_event("zeta_zero")->time - exact);
  CHECK(ea < 1e-5);
  CHECK(eb < 1e-9);
  CHECK(eb <= ea);
}

TEST_CASE("derivative blow-up at ln 2 for example-slow") {
  Trajectory tr = integrate_t(make_example_slow(), make_state({2, 0.1, 4}), 2.0, tol(1e-12));
  const Event* e = tr.find_event("derivative_blowup");
  REQUIRE(e);
  CHECK(e->time == Approx(std::log(2.0)).margin(1e-6));
  CHECK(e->detail >= 1e8);
  // below the threshold initial value there is no blow-up
  Trajectory calm = integrate_t(make_example_slow(), make_state({0.5, 0.1, 1}), 2.0, tol(1e-12));
  CHECK_FALSE(calm.find_event("derivative_blowup"));
}

TEST_CASE("ball exit event") {
  IntegrateOptions io = tol(1e-10);
  io.ball_radius = 0.5;
  Trajectory tr = integrate_tau(make_toy_fixed(default_toy_model(), 1.0), make_state({0, 0.1}), 50.0, io);
  // decaying linear flow never leaves the ball
  CHECK_FALSE(tr.find_event("left_ball"));
  SingularSystem grow = parse_system_json(R"({"dim": 1, "zeta": "1", "phi_s": ["u1"], "phi_ns": ["0"]})");
  Trajectory g = integrate_tau(grow, make_state({0.1}), 10.0, io);
  const Event* e = g.find_event("left_ball");
  REQUIRE(e);
  CHECK(e->time == Approx(std::log(5.0)).margin(1e-8));
}

TEST_CASE("cutoff system is constant outside 2 delta") {
  SingularSystem sys = apply_cutoff(make_example_ok(), 0.1);
  Vec u0 = make_state({0.3, 0.3});
  Trajectory tr = integrate_tau(sys, u0, 10.0);
  for (const auto& s : tr.states) CHECK((s - u0).norm() == 0);
}

TEST_CASE("rescale: zeta = 1 gives t = tau") {
  Trajectory tr = integrate_tau(make_toy_fixed(default_toy_model(), 1.0), make_state({0.2, 0.3}), 10.0);
  RescaleMap m = rescale(tr, make_toy_fixed(default_toy_model(), 1.0));
  for (size_t i = 0; i < m.tau.size(); ++i) CHECK(m.t[i] == Approx(m.tau[i]).margin(1e-12));
  CHECK(m.diverges);
}

TEST_CASE("rescale for example-ok: monotone, divergent, limit slope") {
  double a = 1, b = 0.5;
  SingularSystem sys = make_example_ok();
  Trajectory tr = integrate_tau(sys, make_state({a, b}), 40.0, tol(1e-12));
  RescaleMap m = rescale(tr, sys);
  for (size_t i = 1; i < m.t.size(); ++i) CHECK(m.t[i] > m.t[i - 1]);
  CHECK(m.diverges);
  CHECK(m.verdict == DiffeoVerdict::diffeo);
  double zinf = a * std::exp(-b);
  size_t n = m.t.size();
  double slope = (m.t[n - 1] - m.t[n - 2]) / (m.tau[n - 1] - m.tau[n - 2]);
  CHECK(slope == Approx(zinf).epsilon(1e-6));
  // pullback agrees with direct t integration
  Trajectory pb = pullback(tr, m);
  CHECK(pb.param == Param::t);
  Trajectory direct = integrate_t(sys, make_state({a, b}), pb.times[pb.size() / 2], tol(1e-12));
  CHECK((pb.states[pb.size() / 2] - direct.states.back()).norm() < 1e-7);
}

TEST_CASE("zeta tail classification") {
  std::vector<double> tau, expo, alg, flat;
  for (int i = 0; i <= 400; ++i) {
    double s = 0.1 * i;
    tau.push_back(s);
    expo.push_back(std::exp(-s));
    alg.push_back(1.0 / (1.0 + s));
    flat.push_back(0.3 + std::exp(-s));
  }
  CHECK(classify_zeta_tail(tau, expo, 40.0) == DiffeoVerdict::not_diffeo);
  CHECK(classify_zeta_tail(tau, alg, 40.0) == DiffeoVerdict::inconclusive);
  CHECK(classify_zeta_tail(tau, flat, 40.0) == DiffeoVerdict::diffeo);
  CHECK(std::string(verdict_name(DiffeoVerdict::not_diffeo)) == "not_diffeo");
}

TEST_CASE("pullback refuses non-monotone maps") {
  Trajectory tr = integrate_tau(make_example_ok(), make_state({1, 0.5}), 2.0);
  RescaleMap m = rescale(tr, make_example_ok());
  std::reverse(m.t.begin(), m.t.end());
  CHECK_THROWS_AS(pullback(tr, m), NotMonotone);
}

TEST_CASE("CSV and JSON round trips are byte identical") {
  Trajectory tr = integrate_t(make_example_slow(), make_state({2, 0.1, 4}), 2.0);
  REQUIRE_FALSE(tr.events.empty());
  std::string csv = trajectory_to_csv(tr);
  Trajectory back = trajectory_from_csv(csv);
  CHECK(trajectory_to_csv(back) == csv);
  CHECK(back.size() == tr.size());
  CHECK(back.events.size() == tr.events.size());
  for (size_t i = 0; i < tr.size(); ++i) CHECK((back.states[i] - tr.states[i]).norm() == 0);
  std::string js = trajectory_to_json(tr);
  CHECK(trajectory_to_json(trajectory_from_json(js)) == js);
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(std::stod(format_double(M_PI)) == M_PI);
}

TEST_CASE("dense output interpolates nodes") {
  VectorFn f = [](const Vec& y) { return Vec(-y); };
  OdeSolution s = solve_ode(f, make_state({1.0}), 3.0, 1e-12, 1e-14);
  for (double x : {0.0, 0.37, 1.5, 2.999})
    CHECK(s.at(x)[0] == Approx(std::exp(-x)).epsilon(1e-9));
  CHECK(s.at(s.s[3])[0] == s.y[3][0]);
}

TEST_CASE("pullback of tau orbit equals t orbit on regular examples") {
  struct Case {
    SingularSystem sys;
    Vec u0;
  };
  std::vector<Case> cases = {{make_example_ok(), make_state({1, 0.5})},
                             {make_example_fast(), make_state({1, 0.1})},
                             {make_example_slow(), make_state({0.5, 0.1, 1})},
                             {make_toy_fixed(default_toy_model(), 0.3), make_state({0.4, -0.7})}};
  for (const auto& c : cases) {
    Trajectory tr = integrate_tau(c.sys, c.u0, 10.0, tol(1e-12));
    Trajectory pb = pullback(tr, rescale(tr, c.sys));
    double worst = 0;
    for (size_t i = 0; i < pb.size(); i += 5) {
      if (pb.times[i] == 0) continue;
      Trajectory direct = integrate_t(c.sys, c.u0, pb.times[i], tol(1e-12));
      worst = std::max(worst, (direct.states.back() - pb.states[i]).norm());
    }
    CHECK(worst < 1e-6);
  }
}
