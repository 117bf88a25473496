#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace lmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ScalarField = std::function<double(std::span<const double>)>;
// Writes the gradient at x into out (same length as x).
using VectorField = std::function<void(std::span<const double>, std::span<double>)>;
using HessianField = std::function<Mat(std::span<const double>)>;

/// Constants of the three structural conditions on a potential f:
///
///   degenerate convexity:  |f - f~| <= xi,  Hess f~(x) >= mu (1 + |x|^2/4)^(-theta/2) I
///   dissipativity:         <grad f(x), x> >= a |x|^alpha - b
///   gradient growth:       |grad f(x)| <= M (1 + |x|^zeta)
///   Holder gradient:       |grad f(x) - grad f(y)| <= L |x - y|^beta
///
/// beta_hi is set for composite potentials whose gradient is only Holder in
/// the two-exponent sense |grad f(x) - grad f(y)| <= L (r^beta + r^beta_hi).
struct AssumptionParams {
  double alpha = 2.0;
  double a = 1.0;
  double b = 0.0;
  double zeta = 1.0;
  double M = 1.0;
  double beta = 1.0;
  double L = 1.0;
  double theta = 0.0;
  double mu = 1.0;
  double xi = 0.0;
  std::optional<double> beta_hi;

  // Throws ParamError when the ranges or the exponent chain
  // 2 zeta <= alpha <= zeta + 1 <= beta + 1 are violated.
  void validate() const;

  // Largest step size for which LMC moments grow at most linearly.
  double eta_cap() const;
};

/// Comparator f~ of the degenerate-convexity condition. Only its Hessian
/// matters; the value is kept so |f - f~| can be audited.
struct Comparator {
  ScalarField value;
  HessianField hessian;  // may be empty; finite differences are used then
};

/// Potential f with target density proportional to exp(-f).
/// Immutable after construction; every callable is pure.
struct PotentialSpec {
  std::string name;
  int dim = 1;
  ScalarField eval_f;
  VectorField eval_grad;
  HessianField eval_hess;  // optional
  AssumptionParams params;
  double f_at_zero = 0.0;
  std::optional<Comparator> comparator;
  // Set when grad f(x) = curvature * x exactly; enables exact multi-step
  // propagation of the LMC kernel.
  std::optional<double> isotropic_curvature;

  double f(std::span<const double> x) const { return eval_f(x); }
  double f(const Vec& x) const { return eval_f({x.data(), static_cast<size_t>(x.size())}); }
  Vec grad(const Vec& x) const;
};

/// Bounded perturbation phi with |phi| <= kappa1, |grad phi| <= kappa2 and
/// a grad phi that is Holder with constant L_phi at the base potential's beta.
struct PerturbationSpec {
  std::string name;
  ScalarField phi;
  VectorField grad_phi;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double L_phi = 0.0;
};

// Potential of f + phi with constants transported as in the bounded
// perturbation argument. Throws PerturbationTooLarge when alpha = 1 and
// kappa2 >= a.
PotentialSpec perturb(const PotentialSpec& base, const PerturbationSpec& pert);

// amplitude * cos(|x|); its gradient is amplitude-Lipschitz and bounded by
// amplitude, hence beta-Holder with constant 2 * amplitude for any beta <= 1.
PerturbationSpec cos_norm_perturbation(double amplitude);
// amplitude * sin(x_1).
PerturbationSpec sin_first_perturbation(double amplitude);

Vec fd_gradient(const PotentialSpec& p, const Vec& x, double h);
double fd_hessian_min_eig(const ScalarField& f, const Vec& x, double h);
double fd_hessian_min_eig(const PotentialSpec& p, const Vec& x, double h);

// Default finite-difference step 1e-5 (1 + |x|).
double default_fd_step(const Vec& x);

}  // namespace lmc
