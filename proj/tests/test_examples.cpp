#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "smanifold/examples.hpp"
#include "smanifold/hypotheses.hpp"
#include "smanifold/integrate.hpp"

using namespace smanifold;
using Catch::Approx;

namespace {
IntegrateOptions tight() {
  IntegrateOptions io;
  io.rtol = 1e-12;
  io.atol = 1e-14;
  return io;
}
}  // namespace

TEST_CASE("example fields by hand") {
  Vec u = make_state({0.3, -0.7});
  CHECK((eval_F(make_example_fast(), u) - make_state({0.7, 0.21})).norm() < 1e-15);
  CHECK((eval_F(make_example_ok(), u) - make_state({0.21, 0.7})).norm() < 1e-15);
  Vec w = make_state({0.5, 2, -1});
  CHECK((eval_F(make_example_slow(), w) - make_state({0.5, -2, 0.5})).norm() < 1e-15);
  // remark-slow: zeta F = (-u1 u2, u1 u2^2 (1 - u2), -u3)
  Vec r = make_state({0.5, 0.4, 0.2});
  CHECK((eval_F(make_remark_slow(), r) - make_state({-0.2, 0.5 * 0.16 * 0.6, -0.2})).norm() < 1e-15);
  for (const auto& name : builtin_names()) CHECK(builtin_system(name).name.size() > 0);
  CHECK_THROWS_AS(builtin_system("nope"), Error);
}

TEST_CASE("fast oracle: corrected closed form against integration") {
  CHECK(fast_singular_time(make_state({0.5, 1})) == Approx(-std::log(1 - 0.125)).epsilon(1e-14));
  CHECK(fast_singular_time(make_state({0.5, 1})) == Approx(0.133531).margin(1e-6));
  CHECK(std::isinf(fast_singular_time(make_state({1, 0.1}))));
  for (double u2 : {0.6, 1.0, 1.4}) {
    Vec u0 = make_state({0.5, u2});
    double ts = fast_singular_time(u0);
    Trajectory tr = integrate_t(make_example_fast(), u0, 0.95 * ts, tight());
    double worst = 0.0;
    for (size_t i = 0; i < tr.size(); ++i) worst = std::max(worst, (tr.states[i] - oracle_fast(u0, tr.times[i])).norm());
    CHECK(worst < 1e-8);
    CHECK_THROWS_AS(oracle_fast(u0, ts + 0.01), OutOfValidity);
  }
}

TEST_CASE("slow oracle and blow-up time") {
  CHECK(slow_blowup_time(2.0) == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isinf(slow_blowup_time(0.5)));
  double A = 2.0, B = 0.1, u10 = 2.0;
  Vec u0 = make_state({u10, B, A * u10});
  Trajectory tr = integrate_t(make_example_slow(), u0, 0.9 * std::log(2.0), tight());
  double worst = 0.0;
  for (size_t i = 0; i < tr.size(); ++i)
    worst = std::max(worst, (tr.states[i] - oracle_slow(u10, A, B, tr.times[i])).norm());
  CHECK(worst < 1e-8);
  CHECK_THROWS_AS(oracle_slow(u10, A, B, 0.7), OutOfValidity);
}

TEST_CASE("ok relation holds along integrated orbits") {
  for (double u2 : {0.5, -0.3, 2.0}) {
    Trajectory tr = integrate_t(make_example_ok(), make_state({1, u2}), 20.0, tight());
    CHECK(oracle_ok_relation(tr) < 1e-8);
  }
}

TEST_CASE("toy subspaces") {
  ToyLinearModel m = default_toy_model();
  ToySubspaces s0 = toy_track_subspaces(m, 0.0);
  CHECK(principal_angle(s0.M_minus, make_state({1, 0})) < 1e-14);
  CHECK(principal_angle(s0.M_zero, make_state({0, 1})) < 1e-14);
  ToySubspaces s = toy_track_subspaces(m, 0.01);
  CHECK(s.M_zero_minus.cols() == 1);
  CHECK(s.M_s.cols() == 2);
  REQUIRE(s.reduced_eigs.size() == 1);
  CHECK(s.reduced_eigs[0].real() == Approx(-1));
  // M0-(zeta) eigenvalue of A_s + zeta A_ns is zeta * (reduced eigenvalue) + O(zeta^2)
  CHECK(s.eig_zero[0].real() / 0.01 == Approx(-1).margin(0.03));
  // angle between M-(zeta) and M-(0) is O(zeta): the eigenvector of [[-1, z], [z, -z]] tilts by about z
  for (double z : {1e-2, 1e-3, 1e-4}) {
    double a = principal_angle(toy_track_subspaces(m, z).M_minus, s0.M_minus);
    CHECK(a / z == Approx(1).margin(0.05));
  }
}

TEST_CASE("toy decay rates") {
  ToyLinearModel m = default_toy_model();
  ToySubspaces s1 = toy_track_subspaces(m, 1.0);
  ToyDecay d1 = toy_decay_check(m, 1.0, s1.M_minus.col(0));
  CHECK(d1.rate_t == Approx(d1.rate_tau).epsilon(1e-6));
  ToySubspaces s = toy_track_subspaces(m, 0.1);
  ToyDecay d = toy_decay_check(m, 0.1, s.M_minus.col(0));
  CHECK(d.consistent);
  CHECK(d.rate_t == Approx(10 * d.rate_tau).epsilon(0.05));
  // closed form: the fast eigenvalue of A_s + zeta A_ns
  Mat M = m.A_s + 0.1 * m.A_ns;
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  CHECK(d.rate_tau == Approx(es.eigenvalues()[0]).epsilon(1e-6));
  // on M0- the t-rate stays bounded as zeta shrinks
  double r1 = toy_decay_check(m, 0.1, s.M_zero_minus.col(0)).rate_t;
  double r2 = toy_decay_check(m, 0.01, toy_track_subspaces(m, 0.01).M_zero_minus.col(0)).rate_t;
  CHECK(r1 < -0.5);
  CHECK(r2 < -0.5);
  CHECK(r1 > -1.5);
  CHECK(r2 > -1.5);
}

TEST_CASE("invariant subspace and principal angles") {
  Mat a = (Mat(3, 3) << -1, 0, 0, 0, 0, 1, 0, -1, 0).finished();
  Mat rot = invariant_subspace(a, {{0, 1}, {0, -1}});
  CHECK(rot.cols() == 2);
  CHECK(principal_angle(rot, (Mat(3, 2) << 0, 0, 1, 0, 0, 1).finished()) < 1e-12);
  CHECK(principal_angle(make_state({1, 0}), make_state({1, 1})) == Approx(M_PI / 4));
}

TEST_CASE("Navier-Stokes structure") {
  NSParams p;
  SingularSystem ns = make_navier_stokes(p);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  for (int k = 0; k < 100; ++k) {
    Vec u = make_state({d(rng), d(rng), d(rng), 0, 0});
    CHECK(eval_F(ns, u).norm() <= 1e-12);
    Vec v0 = u;
    v0[1] = 0;
    CHECK(ns_a22_times_v(p, v0).cwiseAbs().maxCoeff() == 0);
  }
  Mat J = jacobian_F(ns, Vec::Zero(5));
  CHECK(J.col(0).norm() == 0);
  CHECK(J.leftCols(3).norm() == 0);
  CHECK((J.bottomRightCorner(2, 2) + ns_stable_block(p)).norm() < 1e-12);
  SpectralSplit sp = spectral_split(J);
  CHECK(sp.n_zero == 3);
  CHECK(sp.n_minus == 2);
  CHECK(sp.n_plus == 0);
  NSParams bad;
  bad.gamma = 0.9;
  CHECK_THROWS_AS(make_navier_stokes(bad), Error);
  NSParams tw;
  tw.sigma = 0.4;
  SingularSystem moving = make_navier_stokes(tw);
  CHECK(eval_zeta(moving, Vec::Zero(5)) == 0);
}

TEST_CASE("builtin hypothesis verdicts") {
  CHECK(check_all(make_example_ok()).overall == Status::pass);
  CHECK(check_all(make_navier_stokes()).overall == Status::pass);
  CHECK(check_all(make_example_slow()).failed() == std::vector<std::string>{"H8"});
  CHECK(check_all(make_remark_slow()).failed() == std::vector<std::string>{"H8"});
  auto fast = check_all(make_example_fast()).failed();
  CHECK(std::find(fast.begin(), fast.end(), "H7") != fast.end());
}
