#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "lmclab/potential.hpp"

namespace lmc {

enum class Metric { KL, TV, W_alpha, W2 };

std::string to_string(Metric m);
// Accepts "KL", "TV", "W_alpha", "W2"; throws PlanError otherwise.
Metric parse_metric(const std::string& name);

struct MlsiConstants {
  double delta;
  double lambda;
};

// delta = theta/(s-2+2theta), lambda = 4 e^(2xi) mu^(-(s-2)/(s-2+2theta)).
// s must be even and >= 2, and >= 4 when theta > 0.
MlsiConstants mlsi_constants(int s, const AssumptionParams& p);

// Natural log of the discrete-time moment coefficient C_s.
double log_moment_coefficient(int s, const AssumptionParams& p, int d);

// Continuous-time moment coefficient K_s.
double continuous_Ks(int s, const AssumptionParams& p, int d);

struct ExpMomentConstants {
  double d_tilde;
  double mu_tilde;
};
ExpMomentConstants exp_moment_constants(const AssumptionParams& p, int d, double f0);

// Discretization constant 4L^2(1 + 2a^beta(1 + 2 alpha mu_tilde / a)).
double sigma_const(const AssumptionParams& p, double f0);

// KL bound for a N(center, I) initialization. log_normalizer is added to f
// so that f + log_normalizer = -log of the normalized target.
double delta0_gaussian(const PotentialSpec& p, const Vec& center, double log_normalizer = 0.0);

// Largest admissible KL accuracy.
double accuracy_cap_psi(const AssumptionParams& p, int d, double sigma, double Delta0);

// (1+beta)theta/(beta(s-2)); zero when theta = 0.
double rate_slack_gamma(int s, const AssumptionParams& p);

// Natural log of c_gamma, using the analytic bound on M_s(rho0 + target).
double log_c_gamma(int s, const AssumptionParams& p, int d, double sigma);

// Converts an accuracy in the requested metric to the KL accuracy that
// guarantees it. f0 enters only through the exponential-moment constants.
double kl_accuracy(Metric m, double epsilon, const AssumptionParams& p, int d, double f0);

// Default moment order 2 + 2 ceil(log(6d/eps_kl)), raised to 4 when theta > 0.
int default_moment_order(int d, double eps_kl, const AssumptionParams& p);

struct PlannerConstants {
  int s = 2;
  double delta = 0.0;
  double lambda = 0.0;
  double lambda_tilde = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  double log_c_gamma = 0.0;
  double log_C_s = 0.0;
  double K_s = 0.0;  // may be +inf for large s
  double d_tilde = 0.0;
  double mu_tilde = 0.0;
  double psi = 0.0;
  double Delta0 = 0.0;
};

struct Plan {
  PlannerConstants constants;
  Metric metric = Metric::KL;
  double epsilon = 0.0;     // requested accuracy in `metric`
  double epsilon_kl = 0.0;  // equivalent KL accuracy
  double eta = 0.0;
  double eta_formula = 0.0;  // value before clamping to the cap
  double eta_cap = 0.0;
  double log_N = 0.0;
  std::optional<std::int64_t> N;  // empty when N does not fit in 63 bits
  bool eta_clamped = false;
  bool feasible = false;
  double f0 = 0.0;  // f(0) of the normalized potential used for the constants
};

struct PlanRequest {
  double epsilon = 0.0;
  double Delta0 = 0.0;
  Metric metric = Metric::KL;
  std::optional<int> s_override;
  double log_normalizer = 0.0;
};

Plan make_plan(const PotentialSpec& p, const PlanRequest& req);

nlohmann::json to_json(const Plan& plan);

}  // namespace lmc
