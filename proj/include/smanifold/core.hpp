#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smanifold/errors.hpp"
#include "smanifold/expr.hpp"

namespace smanifold {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ScalarFn = std::function<double(const Vec&)>;
using VectorFn = std::function<Vec(const Vec&)>;
using MatrixFn = std::function<Mat(const Vec&)>;

// Expression text of a system, kept so it can be written back out.
struct SystemSource {
  std::string zeta;
  std::vector<std::string> phi_s;
  std::vector<std::string> phi_ns;
};

// dU/dt = phi_s(U)/zeta(U) + phi_ns(U).
//
// The raw functions are stored without the cutoff; every evaluation goes through
// eval_F / eval_rhs_t / jacobian_F, which apply the bump when cutoff_delta is set.
// grad_zeta, jac_phi_s and jac_phi_ns are either all set or all empty.
struct SingularSystem {
  int dim = 0;
  std::string name;
  std::vector<std::string> labels;
  ScalarFn zeta;
  VectorFn phi_s;
  VectorFn phi_ns;
  VectorFn grad_zeta;
  MatrixFn jac_phi_s;
  MatrixFn jac_phi_ns;
  std::optional<double> cutoff_delta;
  std::optional<SystemSource> source;

  bool analytic() const { return static_cast<bool>(jac_phi_s); }
};

// Checked state construction: rejects non-finite entries.
Vec make_state(std::initializer_list<double> v);
void require_finite(const Vec& u, const char* what);

double cutoff_bump(double r, double delta);
// d bump / d r
double cutoff_bump_deriv(double r, double delta);

double eval_zeta(const SingularSystem& sys, const Vec& u);
Vec eval_grad_zeta(const SingularSystem& sys, const Vec& u);
// phi_s and phi_ns with the cutoff factor applied.
Vec eval_phi_s(const SingularSystem& sys, const Vec& u);
Vec eval_phi_ns(const SingularSystem& sys, const Vec& u);

Vec eval_F(const SingularSystem& sys, const Vec& u);
Vec eval_rhs_t(const SingularSystem& sys, const Vec& u, double zeta_floor = 1e-300);
Mat jacobian_F(const SingularSystem& sys, const Vec& u);
// Central differences of eval_F regardless of analytic availability.
Mat jacobian_F_fd(const SingularSystem& sys, const Vec& u);
// Central differences of an arbitrary field, step cbrt(eps)*max(1,|u_i|).
Mat jacobian_fd(const VectorFn& f, const Vec& u);
Vec gradient_fd(const ScalarFn& f, const Vec& u);

SingularSystem apply_cutoff(const SingularSystem& sys, double delta);

struct SpectralSplit {
  int n_minus = 0;
  int n_zero = 0;
  int n_plus = 0;
  Mat basis_minus;
  Mat basis_zero;
  Mat basis_plus;
  double c = 0.0;
  double tol_spectral = 0.0;
  Eigen::VectorXcd eigenvalues;
};

double default_tol_spectral(const Mat& m);
// tol_spectral <= 0 selects the default.
SpectralSplit spectral_split(const Mat& m, double tol_spectral = -1.0);

// Scalar field with gradient, used for the (zeta f, F f) rescaling.
struct ScalarField {
  ScalarFn value;
  VectorFn grad;
  std::string text;
};

ScalarField scalar_field_from_expr(const std::string& text, int dim);
// (zeta, F) -> (zeta f, F f): phi_s -> f phi_s, phi_ns unchanged, so dU/dt is untouched.
SingularSystem rescale_system(const SingularSystem& sys, const ScalarField& f);
// U = Q x with Q orthogonal.
SingularSystem rotate_system(const SingularSystem& sys, const Mat& q);

}  // namespace smanifold
