#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smanifold/core.hpp"

namespace smanifold {

enum class Status { pass, fail, inconclusive };
const char* status_name(Status s);

struct HypothesisRecord {
  std::string id;
  Status status = Status::inconclusive;
  std::optional<Vec> witness;
  double max_residual = 0.0;
  double tolerance = 0.0;
  int samples_used = 0;
  std::string note;
};

struct HypothesisReport {
  std::string system;
  std::vector<HypothesisRecord> records;
  Status overall = Status::inconclusive;

  const HypothesisRecord& get(const std::string& id) const;
  // Ids with status fail among H3..H8.
  std::vector<std::string> failed() const;
  std::string to_json() const;
};

struct CheckConfig {
  double radius = 0.1;  // clipped to delta when a cutoff is set
  int n_samples = 32;
  double tol_eq = 1e-7;  // scaled by (1 + local field magnitude)
  std::uint64_t rng_seed = 12345;
  int center_order = 3;
};

HypothesisRecord check_h1(const SingularSystem& sys, const Vec& u0, const CheckConfig& cfg = {});
HypothesisRecord check_h2(const SingularSystem& sys, const CheckConfig& cfg = {});
// Throws NotEquilibrium when |F(0)| > tol_eq.
HypothesisRecord check_h3_neg(const SingularSystem& sys, const CheckConfig& cfg = {});
HypothesisRecord check_h4_sur(const SingularSystem& sys, const CheckConfig& cfg = {});
HypothesisRecord check_h5_center(const SingularSystem& sys, const CheckConfig& cfg = {});
HypothesisRecord check_h6_tras(const SingularSystem& sys, const CheckConfig& cfg = {});
HypothesisRecord check_h7_fast(const SingularSystem& sys, const CheckConfig& cfg = {});
HypothesisRecord check_h8_slow(const SingularSystem& sys, const CheckConfig& cfg = {});

HypothesisReport check_all(const SingularSystem& sys, const std::optional<Vec>& u0 = std::nullopt,
                           const CheckConfig& cfg = {});

struct RescaleEquivalence {
  SingularSystem rescaled;
  HypothesisReport original;
  HypothesisReport transformed;
  bool same_pattern = false;
};

RescaleEquivalence rescale_equivalence_test(const SingularSystem& sys, const ScalarField& f,
                                            const CheckConfig& cfg = {});

// Points with zeta = 0 inside the ball, found by bisection along lines in the grad zeta direction.
std::vector<Vec> sample_singular_set(const SingularSystem& sys, double radius, int n, std::uint64_t seed);

}  // namespace smanifold
