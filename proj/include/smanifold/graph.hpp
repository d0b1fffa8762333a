#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "smanifold/core.hpp"

namespace smanifold {

// Monomials x^e in n variables with min_degree <= |e| <= max_degree that pass an optional filter.
struct MonomialBasis {
  int nvars = 0;
  std::vector<std::vector<int>> exps;

  static MonomialBasis make(int nvars, int min_degree, int max_degree,
                            const std::function<bool(const std::vector<int>&)>& keep = nullptr);
  int size() const { return static_cast<int>(exps.size()); }
  Vec eval(const Vec& x) const;
  // Row j is the gradient of monomial j.
  Mat jac(const Vec& x) const;
};

// y = L x + C m(x / scale).
struct PolyGraph {
  int n_base = 0;
  int n_fiber = 0;
  Mat L;
  MonomialBasis basis;
  Mat C;
  double scale = 1.0;

  Vec eval(const Vec& x) const;
  Mat jac(const Vec& x) const;
  bool trivial() const { return basis.size() == 0 || C.size() == 0 || C.isZero(0.0); }
};

// Invariance of {y_f = L y_b + h(y_b)} under a field split as (f_b, f_f):
//   D(L y_b + h) f_b(y_b, y_f) = f_f(y_b, y_f).
struct GraphProblem {
  int n_base = 0;
  int n_fiber = 0;
  Mat L;  // n_fiber x n_base; empty means zero
  std::function<void(const Vec& yb, const Vec& yf, Vec& fb, Vec& ff)> field;
  std::function<bool(const std::vector<int>&)> keep;
  int min_degree = 2;
  int order = 3;
  double radius = 0.1;
  int n_points = 0;  // 0 picks a multiple of the unknown count
  std::uint64_t seed = 1;
};

struct GraphFit {
  PolyGraph graph;
  double residual_max = 0.0;  // on fresh validation points
  double residual_rms = 0.0;
  double field_scale = 0.0;   // max field magnitude seen on the validation points
  double cond = 1.0;
  bool resonance_warning = false;
  int iterations = 0;
};

GraphFit fit_invariant_graph(const GraphProblem& p);

// Uniform sample in the Euclidean ball of radius r.
Vec sample_ball(int n, double r, std::mt19937_64& rng);
Vec sample_unit_sphere(int n, std::mt19937_64& rng);

}  // namespace smanifold
