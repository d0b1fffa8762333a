#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "smanifold/core.hpp"
#include "smanifold/examples.hpp"
#include "smanifold/system_io.hpp"

using namespace smanifold;
using Catch::Approx;

namespace {

Vec random_ball(std::mt19937_64& rng, int n, double r) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v.normalized() * r * std::pow(u(rng), 1.0 / n);
}

Mat random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return Eigen::HouseholderQR<Mat>(a).householderQ();
}

}  // namespace

TEST_CASE("F and the t right-hand side on hand-evaluated points") {
  CHECK((eval_F(make_example_fast(), make_state({1, 1})) - make_state({-1, -1})).norm() == 0);
  CHECK((eval_F(make_example_ok(), make_state({2, 3})) - make_state({-6, -3})).norm() == 0);
  CHECK((eval_rhs_t(make_example_fast(), make_state({0.5, 1})) - make_state({-2, -1})).norm() < 1e-15);
  CHECK(eval_rhs_t(make_example_ok(), make_state({1, 0})).norm() == 0);
  CHECK((eval_rhs_t(make_example_slow(), make_state({1, 1, 1})) - make_state({-1, -1, -1})).norm() < 1e-15);
  for (const auto& name : builtin_names()) {
    auto sys = builtin_system(name);
    CHECK(eval_F(sys, Vec::Zero(sys.dim)).norm() < 1e-14);
  }
}

TEST_CASE("eval_rhs_t guards the singular set") {
  auto sys = make_example_ok();
  CHECK_THROWS_AS(eval_rhs_t(sys, make_state({1e-12, 1}), 1e-9), SingularityProximity);
  CHECK_THROWS_AS(eval_F(sys, make_state({1, 2, 3})), DimensionMismatch);
  CHECK_THROWS_AS(make_state({1, NAN}), InvalidState);
}

TEST_CASE("zeta times the t field equals F") {
  std::mt19937_64 rng(1);
  for (const auto& name : builtin_names()) {
    auto sys = builtin_system(name);
    for (int k = 0; k < 50; ++k) {
      Vec u = random_ball(rng, sys.dim, 0.1);
      double z = eval_zeta(sys, u);
      if (std::abs(z) < 1e-6) continue;
      Vec lhs = z * eval_rhs_t(sys, u);
      Vec F = eval_F(sys, u);
      CHECK((lhs - F).norm() <= 1e-12 * (1 + F.norm()));
    }
  }
}

TEST_CASE("analytic Jacobians match central differences") {
  CHECK((jacobian_F(make_example_fast(), Vec::Zero(2)) - (Mat(2, 2) << 0, -1, 0, 0).finished()).norm() == 0);
  CHECK((jacobian_F(make_example_ok(), Vec::Zero(2)) - (Mat(2, 2) << 0, 0, 0, -1).finished()).norm() == 0);
  std::mt19937_64 rng(2);
  for (const auto& name : builtin_names()) {
    auto sys = builtin_system(name);
    for (int k = 0; k < 100; ++k) {
      Vec u = random_ball(rng, sys.dim, 0.1);
      Mat a = jacobian_F(sys, u), f = jacobian_F_fd(sys, u);
      CHECK((a - f).cwiseAbs().maxCoeff() <= 1e-6 * (1 + a.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("spectral split counts and margin") {
  SpectralSplit nil = spectral_split((Mat(2, 2) << 0, -1, 0, 0).finished());
  CHECK(nil.n_minus == 0);
  CHECK(nil.n_zero == 2);
  CHECK(nil.c == 0);
  SpectralSplit ok = spectral_split(jacobian_F(make_example_ok(), Vec::Zero(2)));
  CHECK(ok.n_minus == 1);
  CHECK(ok.n_zero == 1);
  CHECK(ok.c == Approx(0.9));
  SpectralSplit ns = spectral_split(jacobian_F(make_navier_stokes(), Vec::Zero(5)));
  CHECK(ns.n_zero == 3);
  CHECK(ns.n_minus == 2);
  CHECK(ns.n_plus == 0);
  SpectralSplit plus = spectral_split((Mat(2, 2) << 1, 0, 0, -2).finished());
  CHECK(plus.n_plus == 1);
  CHECK(plus.c == Approx(1.8));

  // rotation: complex pair of the minus class gives two real columns
  Mat rot = (Mat(3, 3) << -1, 2, 0, -2, -1, 0, 0, 0, 0).finished();
  SpectralSplit r = spectral_split(rot);
  CHECK(r.n_minus == 2);
  CHECK(r.basis_minus.cols() == 2);
  Mat all(3, 3);
  all << r.basis_minus, r.basis_zero;
  CHECK(std::abs(all.determinant()) > 1e-6);
  for (int k = 0; k < r.eigenvalues.size(); ++k)
    if (r.eigenvalues[k].real() < -r.tol_spectral) CHECK(r.eigenvalues[k].real() < -r.c);
}

TEST_CASE("spectral split is invariant under orthogonal similarity") {
  std::mt19937_64 rng(3);
  for (const auto& name : builtin_names()) {
    Mat m = jacobian_F(builtin_system(name), Vec::Zero(builtin_system(name).dim));
    SpectralSplit a = spectral_split(m);
    for (int k = 0; k < 5; ++k) {
      Mat q = random_orthogonal(rng, static_cast<int>(m.rows()));
      SpectralSplit b = spectral_split(q.transpose() * m * q);
      CHECK(a.n_minus == b.n_minus);
      CHECK(a.n_zero == b.n_zero);
      CHECK(a.n_plus == b.n_plus);
    }
  }
}

TEST_CASE("cutoff: identity inside, zero outside, C2 bump") {
  auto sys = apply_cutoff(make_example_ok(), 0.1);
  Vec dir = make_state({0.6, 0.8});
  Vec inside = 0.05 * dir;
  CHECK((eval_F(sys, inside) - eval_F(make_example_ok(), inside)).norm() == 0);
  CHECK(eval_F(sys, 0.2 * dir).norm() == 0);
  CHECK(eval_F(sys, 0.35 * dir).norm() == 0);
  Vec mid = 0.15 * dir;
  CHECK((eval_F(sys, mid) - 0.5 * eval_F(make_example_ok(), mid)).norm() < 1e-15);
  CHECK(cutoff_bump(0.15, 0.1) == Approx(0.5));
  // first and second derivatives continuous across delta and 2 delta, in s = r/delta - 1
  const double d = 0.1, h = 1e-6;
  auto first = [&](double s) { return d * cutoff_bump_deriv(d * (1 + s), d); };
  auto second = [&](double s) { return (first(s + 1e-7) - first(s - 1e-7)) / 2e-7; };
  for (double s0 : {0.0, 1.0}) {
    CHECK(std::abs(first(s0 - h) - first(s0 + h)) < 1e-4);
    CHECK(std::abs(second(s0 - h) - second(s0 + h)) < 1e-4);
  }
  CHECK(second(0.5 - 0.2) == Approx(-second(0.5 + 0.2)).margin(1e-6));
  // monotone in between
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    double b = cutoff_bump(d + d * i / 100.0, d);
    CHECK(b <= prev + 1e-15);
    prev = b;
  }
  // Jacobian of the cutoff system still matches differences
  Vec u = 0.13 * make_state({0.28, 0.96});
  CHECK((jacobian_F(sys, u) - jacobian_F_fd(sys, u)).norm() < 1e-6);
}

TEST_CASE("rescaling by f keeps the t field and multiplies F") {
  auto sys = make_example_fast();
  ScalarField f = scalar_field_from_expr("exp(u2) * (1 + u1^2)", 2);
  auto r = rescale_system(sys, f);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    Vec u = random_ball(rng, 2, 0.3);
    CHECK(eval_zeta(r, u) == Approx(eval_zeta(sys, u) * f.value(u)).epsilon(1e-14));
    CHECK((eval_F(r, u) - f.value(u) * eval_F(sys, u)).norm() < 1e-14);
    if (std::abs(u[0]) > 1e-3) CHECK((eval_rhs_t(r, u) - eval_rhs_t(sys, u)).norm() < 1e-10);
    CHECK((jacobian_F(r, u) - jacobian_F_fd(r, u)).norm() < 1e-6);
  }
  auto id = rescale_system(sys, scalar_field_from_expr("1", 2));
  Vec u = make_state({0.3, -0.2});
  CHECK((eval_F(id, u) - eval_F(sys, u)).norm() == 0);
}

TEST_CASE("rotation conjugates the field") {
  std::mt19937_64 rng(6);
  auto sys = make_example_slow();
  Mat q = random_orthogonal(rng, 3);
  auto r = rotate_system(sys, q);
  for (int k = 0; k < 10; ++k) {
    Vec x = random_ball(rng, 3, 0.5);
    CHECK((eval_F(r, x) - q.transpose() * eval_F(sys, q * x)).norm() < 1e-14);
    CHECK(eval_zeta(r, x) == Approx(eval_zeta(sys, q * x)));
    CHECK((jacobian_F(r, x) - jacobian_F_fd(r, x)).norm() < 1e-6);
  }
}

TEST_CASE("system JSON round trip") {
  for (const auto& name : builtin_names()) {
    auto sys = builtin_system(name);
    std::string text = export_system_json(sys);
    auto back = parse_system_json(text, name);
    CHECK(export_system_json(back) == text);
    Vec u = Vec::Constant(sys.dim, 0.07);
    u[0] = 0.11;
    CHECK((eval_F(back, u) - eval_F(sys, u)).norm() == 0);
  }
  auto withd = parse_system_json(R"({"dim": 1, "zeta": "u1", "phi_s": ["-u1"], "phi_ns": ["0"], "delta": 0.5})");
  REQUIRE(withd.cutoff_delta);
  CHECK(*withd.cutoff_delta == 0.5);
  CHECK_THROWS_AS(parse_system_json(R"({"dim": 2, "zeta": "u1", "phi_s": ["0"], "phi_ns": ["0", "0"]})"),
                  DimensionMismatch);
  CHECK_THROWS_AS(parse_system_json(R"({"dim": 1, "zeta": "u1 *", "phi_s": ["0"], "phi_ns": ["0"]})"), ParseError);
  CHECK_THROWS_AS(parse_system_json("{not json"), Error);
  CHECK_THROWS_AS(load_system_json("/nonexistent/system.json"), IoError);
}
