#include <catch_amalgamated.hpp>

#include <json.hpp>

#include "smanifold/examples.hpp"
#include "smanifold/hypotheses.hpp"
#include "smanifold/system_io.hpp"

using namespace smanifold;
using Catch::Approx;

namespace {
SingularSystem sys_from(const std::string& zeta, const std::vector<std::string>& phi_s) {
  nlohmann::json j;
  j["dim"] = phi_s.size();
  j["zeta"] = zeta;
  j["phi_s"] = phi_s;
  j["phi_ns"] = std::vector<std::string>(phi_s.size(), "0");
  return parse_system_json(j.dump());
}
}  // namespace

TEST_CASE("H1 positivity of the initial datum") {
  auto sys = make_example_ok();
  CHECK(check_h1(sys, make_state({1, 0.5})).status == Status::pass);
  auto neg = check_h1(sys, make_state({-1, 0.5}));
  CHECK(neg.status == Status::fail);
  REQUIRE(neg.witness);
  CHECK((*neg.witness - make_state({-1, 0.5})).norm() == 0);
  CHECK(check_h1(sys, make_state({0, 0.5})).status == Status::fail);
  CHECK_THROWS_AS(check_h1(sys, make_state({1})), DimensionMismatch);
}

TEST_CASE("H2 cutoff support") {
  CHECK(check_h2(make_example_ok()).status == Status::inconclusive);
  CHECK(check_h2(apply_cutoff(make_example_ok(), 0.05)).status == Status::pass);
  // the bump is applied at evaluation time, so setting delta alone already gives compact support
  SingularSystem bare = make_example_ok();
  bare.cutoff_delta = 0.05;
  auto r = check_h2(bare);
  CHECK(r.status == Status::pass);
  CHECK(r.max_residual == 0);
  CHECK(r.samples_used == CheckConfig{}.n_samples);
}

TEST_CASE("H3 and H4 at the origin") {
  CHECK(check_h3_neg(make_example_ok()).status == Status::pass);
  CHECK(check_h3_neg(sys_from("u1", {"u1", "-u2"})).status == Status::fail);
  CHECK_THROWS_AS(check_h3_neg(sys_from("u1", {"1", "-u2"})), NotEquilibrium);
  CHECK(check_h4_sur(make_example_ok()).status == Status::pass);
  auto sq = check_h4_sur(sys_from("u1^2", {"-u1*u2", "-u2"}));
  CHECK(sq.status == Status::fail);
  CHECK(sq.max_residual == 0);
}

TEST_CASE("H5 center manifold on the singular set") {
  CHECK(check_h5_center(make_example_ok()).status == Status::pass);
  // W^c = {u3 = 0}; on S it carries F = (u2^2, 0, 0)
  auto r = check_h5_center(sys_from("u1", {"u2^2", "0", "-u3"}));
  CHECK(r.status == Status::fail);
  REQUIRE(r.witness);
  CHECK(std::abs((*r.witness)[0]) < 1e-9);
  CHECK(r.max_residual == Approx((*r.witness)[1] * (*r.witness)[1]).epsilon(1e-6));
  // nilpotent example: the whole plane is center, F = (-u2, 0) on S
  CHECK(check_h5_center(make_example_fast()).status == Status::fail);
}

TEST_CASE("H6 transversality of equilibria") {
  CHECK(check_h6_tras(make_example_ok()).status == Status::pass);
  CHECK(check_h6_tras(make_navier_stokes()).status == Status::pass);
  auto iso = check_h6_tras(sys_from("u1", {"-u1", "-u2"}));
  CHECK(iso.status == Status::fail);
  CHECK(iso.note.find("isolated") != std::string::npos);
  auto tan = check_h6_tras(sys_from("u1", {"-u1", "0"}));
  CHECK(tan.status == Status::fail);
  CHECK(tan.note.find("tangent") != std::string::npos);
}

TEST_CASE("H7 residual equals |u2| on S for example-fast") {
  CheckConfig cfg;
  auto sys = make_example_fast();
  auto r = check_h7_fast(sys, cfg);
  CHECK(r.status == Status::fail);
  auto pts = sample_singular_set(sys, cfg.radius, cfg.n_samples, cfg.rng_seed + 7);
  double mx = 0;
  for (const Vec& u : pts) mx = std::max(mx, std::abs(u[1]));
  CHECK(r.max_residual == Approx(mx).margin(1e-8));
  CHECK(check_h7_fast(make_example_ok()).status == Status::pass);
  CHECK(check_h7_fast(make_navier_stokes()).status == Status::pass);
}

TEST_CASE("H8 slow condition") {
  auto slow = check_h8_slow(make_example_slow());
  CHECK(slow.status == Status::fail);
  REQUIRE(slow.witness);
  CHECK(check_h8_slow(make_example_ok()).status == Status::pass);
  CHECK(check_h8_slow(make_navier_stokes()).status == Status::pass);
}

TEST_CASE("sampled singular points lie on S inside the ball") {
  for (const auto& name : builtin_names()) {
    auto sys = builtin_system(name);
    for (const Vec& u : sample_singular_set(sys, 0.1, 16, 3)) {
      CHECK(std::abs(eval_zeta(sys, u)) < 1e-10);
      CHECK(u.norm() <= 0.1 + 1e-12);
    }
  }
}

TEST_CASE("reports are deterministic and well-formed") {
  auto a = check_all(make_example_ok(), make_state({1, 0.5}));
  auto b = check_all(make_example_ok(), make_state({1, 0.5}));
  CHECK(a.to_json() == b.to_json());
  auto j = nlohmann::json::parse(a.to_json());
  CHECK(j["system"] == "example-ok");
  CHECK(j["overall"] == "pass");
  REQUIRE(j["hypotheses"].size() == 8);
  for (int i = 0; i < 8; ++i) {
    const auto& rec = j["hypotheses"][i];
    CHECK(rec["hypothesis"] == "H" + std::to_string(i + 1));
    for (const char* key : {"status", "witness", "residual", "tolerance", "samples"}) CHECK(rec.contains(key));
  }
  CHECK(a.get("H1").status == Status::pass);
  CheckConfig other;
  other.rng_seed = 99;
  auto c = check_all(make_example_fast(), std::nullopt, other);
  auto d = check_all(make_example_fast());
  CHECK(c.failed() == d.failed());
  CHECK(d.overall == Status::fail);
}

TEST_CASE("rescaling by a positive field keeps the verdicts") {
  struct Case {
    SingularSystem sys;
    std::string f;
  };
  std::vector<Case> cases = {{make_example_ok(), "exp(u2)"},
                             {make_example_fast(), "1 + u1^2"},
                             {make_example_slow(), "2 + sin(u3)"}};
  for (const auto& c : cases) {
    auto eq = rescale_equivalence_test(c.sys, scalar_field_from_expr(c.f, c.sys.dim));
    CHECK(eq.same_pattern);
    CHECK(eq.original.failed() == eq.transformed.failed());
  }
}
