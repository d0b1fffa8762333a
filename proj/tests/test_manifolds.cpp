#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "smanifold/examples.hpp"
#include "smanifold/manifolds.hpp"
#include "smanifold/system_io.hpp"

using namespace smanifold;
using Catch::Approx;

namespace {

// zeta = u1, F = (0, -u2): fast part decays exactly like e^{-tau}, no coupling
SingularSystem decoupled() {
  return parse_system_json(R"({"dim": 2, "zeta": "u1", "phi_s": ["0", "-u2"], "phi_ns": ["0", "0"]})");
}

const NormalForm& ns_form() {
  static const NormalForm nf = normal_form(make_navier_stokes());
  return nf;
}

ContractionOptions small_grid() {
  ContractionOptions o;
  o.n_nodes = 120;
  return o;
}

}  // namespace

TEST_CASE("linear normalization of a Jordan block") {
  Mat m = (Mat(3, 3) << 0, 1, 0, 0, 0, 0, 0, 0, -2).finished();
  SplitCoordinates sc = linear_normalize(m, spectral_split(m), 100.0);
  CHECK(sc.n_zero == 2);
  CHECK(sc.n_minus == 1);
  CHECK((sc.transform * sc.inverse - Mat::Identity(3, 3)).norm() < 1e-12);
  CHECK((sc.A - sc.transform * m * sc.inverse).norm() < 1e-12);
  CHECK(sc.nilpotent_norm <= 1.0 / 100 + 1e-15);
  CHECK(sc.N_zero.norm() == Approx(sc.nilpotent_norm).margin(1e-12));
  CHECK(sc.A_minus(0, 0) == Approx(-2));
  CHECK((sc.A.topLeftCorner(2, 2) - sc.A_zero_bar - sc.N_zero).norm() < 1e-12);
  // exp(Abar t) preserves norms
  Vec v = make_state({0.3, -0.4});
  for (double t : {0.5, 5.0, 50.0}) CHECK(((sc.A_zero_bar * t).exp() * v).norm() == Approx(v.norm()).epsilon(1e-12));
}

TEST_CASE("linear normalization keeps rotations in Abar") {
  Mat m = (Mat(3, 3) << 0, 1, 0, -1, 0, 0, 0, 0, -1).finished();
  SplitCoordinates sc = linear_normalize(m, spectral_split(m));
  CHECK(sc.n_zero == 2);
  CHECK(sc.nilpotent_norm < 1e-12);
  Vec v = make_state({1, 2});
  CHECK(((sc.A_zero_bar * 3.0).exp() * v).norm() == Approx(v.norm()).epsilon(1e-12));
}

TEST_CASE("linear normalization of example-slow") {
  SplitCoordinates sc = linear_normalize(make_example_slow());
  CHECK(sc.n_zero == 2);
  CHECK(sc.n_minus == 1);
  CHECK(sc.A_minus(0, 0) == Approx(-1));
  CHECK(sc.A.topLeftCorner(2, 2).norm() < 1e-12);
  CHECK(sc.A.topRightCorner(2, 1).norm() < 1e-12);
  CHECK(sc.A.bottomLeftCorner(1, 2).norm() < 1e-12);
}

TEST_CASE("decay rate fits") {
  std::vector<double> tau, v;
  for (int i = 0; i <= 50; ++i) {
    tau.push_back(0.2 * i);
    v.push_back(3.0 * std::exp(-2.0 * tau.back()));
  }
  DecayFit f = fit_decay_rate(tau, v, 1.0);
  CHECK(f.rate == Approx(-2).epsilon(1e-12));
  CHECK(f.constant == Approx(3).epsilon(1e-10));
  CHECK(f.points == 51);
  CHECK(fit_decay_rate(tau, v, 0.5).points == 26);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<double> noisy = v;
  for (double& x : noisy) x *= std::exp(g(rng));
  CHECK(fit_decay_rate(tau, noisy, 1.0).rate == Approx(-2).margin(0.01));

  // values under the floor are skipped
  std::vector<double> clipped = v;
  for (size_t i = 40; i < clipped.size(); ++i) clipped[i] = 0;
  DecayFit c = fit_decay_rate(tau, clipped, 1.0, 1e-300);
  CHECK(c.points == 40);
  CHECK(c.rate == Approx(-2).epsilon(1e-12));

  CHECK_THROWS_AS(fit_decay_rate({0, 1, 2}, {1, 0.5, 0.25}), DegenerateFit);
  CHECK_THROWS_AS(fit_decay_rate({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}, 1.0), DegenerateFit);
}

TEST_CASE("fixed point derivative") {
  Mat half = Mat::Constant(1, 1, 0.5), one = Mat::Constant(1, 1, 1.0);
  CHECK(fixed_point_derivative(half, one)(0, 0) == Approx(2).epsilon(1e-12));
  CHECK_THROWS_AS(fixed_point_derivative(Mat::Constant(1, 1, 1.5), one), NotContraction);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  Mat Tx(6, 6), Ty(6, 2);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) Tx(i, j) = 0.1 * u(rng);
    for (int j = 0; j < 2; ++j) Ty(i, j) = u(rng);
  }
  Mat exact = (Mat::Identity(6, 6) - Tx).partialPivLu().solve(Ty);
  CHECK((fixed_point_derivative(Tx, Ty) - exact).norm() < 1e-10);
  // weighted: a large unweighted row sum is fine when weights make it contract
  Mat big = (Mat(2, 2) << 0, 3, 0.01, 0).finished();
  Vec w = make_state({1, 10});
  CHECK_THROWS_AS(fixed_point_derivative(big, Mat::Identity(2, 2)), NotContraction);
  Mat wsol = fixed_point_derivative(big, Mat::Identity(2, 2), w);
  CHECK((wsol - (Mat::Identity(2, 2) - big).inverse()).norm() < 1e-10);
}

TEST_CASE("geometric grid and weighted grid") {
  auto g = geometric_grid(40.0, 200, 0.01);
  REQUIRE(g.size() == 200);
  CHECK(g.front() == 0);
  CHECK(g.back() == 40.0);
  CHECK(g[1] == Approx(0.01));
  double q = (g[2] - g[1]) / (g[1] - g[0]);
  for (size_t i = 2; i + 1 < g.size(); ++i) {
    CHECK(g[i] > g[i - 1]);
    CHECK((g[i] - g[i - 1]) / (g[i - 1] - g[i - 2]) == Approx(q).epsilon(1e-6));
  }
  WeightedGrid w;
  w.taus = {0, 1, 2, 3};
  w.values = Mat(4, 1);
  w.values << 1, std::exp(-1.0), std::exp(-2.0), std::exp(-3.0);
  w.weight_rate = 0.5;
  CHECK(w.weighted_norm() == Approx(1.0));
  for (int i = 0; i < 4; ++i) CHECK(w.at(w.taus[i])[0] == w.values(i, 0));
  CHECK(w.at(1.5)[0] == Approx(std::exp(-1.5)).epsilon(0.05));
}

TEST_CASE("stable component: zero and linear data") {
  NormalForm nf = normal_form(decoupled());
  REQUIRE(nf.n0 == 0);
  REQUIRE(nf.n_minus == 1);
  auto taus = geometric_grid(40.0 / nf.c, 300, 0.01);
  StableComponent z = stable_component(nf, make_state({0}), make_state({0}), taus);
  CHECK(z.x_minus.values.norm() == 0);
  StableComponent s = stable_component(nf, make_state({0}), make_state({0.05}), taus);
  double worst = 0;
  for (int i = 0; i < s.x_minus.size(); ++i)
    worst = std::max(worst, std::abs(s.x_minus.values(i, 0) - 0.05 * std::exp(-taus[i])));
  CHECK(worst < 1e-12);
  CHECK(s.k_minus == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("perturbation vanishes without coupling or without the fast part") {
  NormalForm nf = normal_form(decoupled());
  ContractionOptions opts;
  UniformlyStablePoint p = uniformly_stable_point(nf, make_state({0.03}), make_state({0.05}), opts);
  CHECK(p.pert.norm < 1e-12);
  // NS: zero fast part gives zero perturbation
  const NormalForm& ns = ns_form();
  Vec a(3);
  a << 0.02, 0.01, -0.01;
  UniformlyStablePoint q = uniformly_stable_point(ns, a, Vec::Zero(2), small_grid());
  CHECK(q.pert.norm == 0);
  // anchor on zeta = 0 gives zero perturbation
  a[0] = 0;
  UniformlyStablePoint r = uniformly_stable_point(ns, a, make_state({0.02, -0.01}), small_grid());
  CHECK(r.pert.norm <= 1e-12);
}

TEST_CASE("NS stable sensitivity matches finite differences") {
  const NormalForm& nf = ns_form();
  Vec anchor(3);
  anchor << 0, 0.01, 0.02;
  Vec xm = make_state({0.02, -0.015});
  ContractionOptions opts = small_grid();
  double tmax = 40.0 / nf.c;
  auto taus = geometric_grid(tmax, opts.n_nodes, opts.first_step);
  Mat S = stable_sensitivity(nf, anchor, xm, taus, opts);
  REQUIRE(S.rows() == static_cast<int>(taus.size()) * 2);
  REQUIRE(S.cols() == 2);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vec p = xm, m = xm;
    p[j] += h;
    m[j] -= h;
    Mat vp = stable_component(nf, anchor, p, taus, opts).x_minus.values;
    Mat vm = stable_component(nf, anchor, m, taus, opts).x_minus.values;
    double worst = 0;
    for (int i = 0; i < vp.rows(); ++i)
      for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs((vp(i, k) - vm(i, k)) / (2 * h) - S(2 * i + k, j)));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("center graph is tangent to the center space") {
  CenterGraph cg = center_graph(make_example_ok());
  REQUIRE(cg.n_center == 1);
  for (double s : {1e-2, 1e-3}) {
    Vec x = make_state({s});
    Vec u = cg.point(x);
    CHECK((u - cg.basis_center * x).norm() <= 1e-10 * s);
  }
  CenterGraph ns = center_graph(make_navier_stokes());
  CHECK(ns.n_center == 3);
  double r1 = (ns.point(Vec::Constant(3, 1e-2)) - ns.basis_center * Vec::Constant(3, 1e-2)).norm();
  double r2 = (ns.point(Vec::Constant(3, 5e-3)) - ns.basis_center * Vec::Constant(3, 5e-3)).norm();
  // quadratic tangency: halving x divides the offset by about four
  if (r1 > 1e-13) CHECK(r1 / std::max(r2, 1e-300) > 3.0);
}

TEST_CASE("normal form reassembles and inverts") {
  for (const auto& sys : {make_example_ok(), make_toy_system(default_toy_model())}) {
    NormalForm nf = normal_form(sys);
    CHECK(nf.reassembly_error < 1e-5);
    CHECK(nf.measure_reassembly(64, 5) < 1e-5);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.02, 0.02);
    for (int k = 0; k < 10; ++k) {
      Vec x(nf.dim);
      for (int i = 0; i < nf.dim; ++i) x[i] = u(rng);
      CHECK((nf.from_original(nf.to_original(x)) - x).norm() < 1e-10);
    }
  }
  CHECK(ns_form().reassembly_error < 1e-5);
  CHECK_THROWS_AS(normal_form(make_example_fast()), FactorizationResidual);
}

TEST_CASE("slow flow of the toy model follows the slow eigenvalue") {
  NormalForm nf = normal_form(make_toy_system(default_toy_model()));
  ReducedSystem rs = slow_reduce(nf);
  REQUIRE(rs.dim == 2);
  ToyLinearModel m = default_toy_model();
  for (double z : {0.01, 0.03, 0.05}) {
    Mat A = m.A_s + z * m.A_ns;
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    double slow = es.eigenvalues().maxCoeff() / z;
    Vec x = make_state({z, 0.02});
    Vec r = rs.rhs(x);
    CHECK(r[0] == 0);
    CHECK(r[1] == Approx(slow * 0.02).epsilon(1e-6));
  }
}

TEST_CASE("decomposition of a toy orbit reconstructs it") {
  NormalForm nf = normal_form(make_toy_system(default_toy_model()));
  Vec u0 = make_state({0.02, 0.03, 0.01});
  OrbitDecomposition d = decompose_from(nf, u0);
  CHECK(d.reconstruction_error < 1e-8);
  CHECK(d.fast_rate_ok);
  CHECK(d.fast_fit.rate <= -nf.c / 2 + 0.1 * nf.c);
  CHECK_FALSE(d.slow_only);
  std::string csv = decomposition_csv(d);
  CHECK(csv.rfind("tau,", 0) == 0);
}
