#include "lmclab/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lmclab/errors.hpp"

namespace lmc {

namespace {

constexpr double kPi = std::numbers::pi;

void require_order(int s) {
  if (s < 2 || s % 2 != 0) throw PlanError("moment order s must be an even integer >= 2, got " + std::to_string(s));
}

// Exponent (s-2)/alpha + 1 shared by C_s and c_gamma.
double order_exponent(int s, double alpha) { return (s - 2) / alpha + 1.0; }

double log_ratio_3a2b3(const AssumptionParams& p) {
  return std::log((3.0 * p.a + 2.0 * p.b + 3.0) / std::min(1.0, p.a));
}

// log(1 + (1 - alpha/2) log d)
double log_dim_factor(const AssumptionParams& p, int d) {
  return std::log1p((1.0 - 0.5 * p.alpha) * std::log(static_cast<double>(d)));
}

}  // namespace

std::string to_string(Metric m) {
  switch (m) {
    case Metric::KL: return "KL";
    case Metric::TV: return "TV";
    case Metric::W_alpha: return "W_alpha";
    case Metric::W2: return "W2";
  }
  return "KL";
}

Metric parse_metric(const std::string& name) {
  if (name == "KL") return Metric::KL;
  if (name == "TV") return Metric::TV;
  if (name == "W_alpha") return Metric::W_alpha;
  if (name == "W2") return Metric::W2;
  throw PlanError("unknown metric '" + name + "'");
}

MlsiConstants mlsi_constants(int s, const AssumptionParams& p) {
  require_order(s);
  if (p.theta > 0.0 && s < 4) throw PlanError("theta > 0 requires moment order s >= 4");
  const double denom = s - 2 + 2.0 * p.theta;
  // theta = 0 and s = 2 is the 0/0 case; both exponents are taken as 0.
  const double delta = denom > 0.0 ? p.theta / denom : 0.0;
  const double expo = denom > 0.0 ? (s - 2) / denom : 0.0;
  return {delta, 4.0 * std::exp(2.0 * p.xi) * std::pow(p.mu, -expo)};
}

double log_moment_coefficient(int s, const AssumptionParams& p, int d) {
  require_order(s);
  const double e = order_exponent(s, p.alpha);
  return e * log_ratio_3a2b3(p) + s * std::log(static_cast<double>(s)) + e * std::log(static_cast<double>(d));
}

double continuous_Ks(int s, const AssumptionParams& p, int d) {
  if (s < 2) throw PlanError("moment order s must be >= 2");
  const double base = p.b + d + p.a + s - 2.0;
  return std::exp(std::log(base) + ((s - 2) / p.alpha) * std::log(base / p.a) + std::log(static_cast<double>(s)));
}

ExpMomentConstants exp_moment_constants(const AssumptionParams& p, int d, double f0) {
  if (!(p.a > 0.0)) throw PlanError("a must be positive");
  const double dd = static_cast<double>(d);
  const double ratio = (2.0 * p.a + 2.0 * p.b) / p.a;
  const double mu_tilde = std::log(16.0 * kPi / p.a) + p.M * ratio * ratio + p.b + std::abs(f0);
  const double d_tilde = dd * (1.0 + (1.0 - 0.5 * p.alpha) * std::log(dd));
  return {d_tilde, mu_tilde};
}

double sigma_const(const AssumptionParams& p, double f0) {
  const double mu_tilde = exp_moment_constants(p, 1, f0).mu_tilde;
  return 4.0 * p.L * p.L * (1.0 + 2.0 * std::pow(p.a, p.beta) * (1.0 + 2.0 * p.alpha * mu_tilde / p.a));
}

double delta0_gaussian(const PotentialSpec& p, const Vec& center, double log_normalizer) {
  if (center.size() != p.dim) throw PlanError("init center has the wrong dimension");
  const double d = p.dim;
  const AssumptionParams& c = p.params;
  return p.f(center) + log_normalizer + c.L / (c.beta + 1.0) * std::pow(d, 0.5 * (c.beta + 1.0)) +
         0.5 * d * std::log(2.0 * kPi * std::numbers::e);
}

double accuracy_cap_psi(const AssumptionParams& p, int d, double sigma, double Delta0) {
  if (!(Delta0 > 0.0)) throw PlanError("Delta0 must be positive");
  const double lt = 4.0 * std::exp(2.0 * p.xi) / std::max(1.0, p.mu);
  const double lt2 = lt * lt;
  const double lt3 = lt2 * lt;
  const double sd = std::min(1.0, sigma * d);
  const double m2b = std::pow(p.M, 2.0 * p.beta);
  const double terms[] = {
      2.0,
      2.0 * Delta0 / std::numbers::e,
      2.0 * Delta0 * std::exp(-1.0 / (16.0 * std::min(lt, lt2))),
      32.0 * sd * std::min(lt, lt3) * std::pow(std::min(1.0, 1.0 / Delta0), 0.25 * p.beta),
      16.0 * std::min(lt, lt2) * sd * std::min(1.0, p.a / (2.0 * p.M * p.M)),
      2.0 * std::min(std::sqrt(lt), lt2) * std::sqrt(std::min(1.0, 2.0 * p.a * sigma * d * d / m2b)),
      8.0 * std::min(lt2, lt) * std::cbrt(std::min(1.0, p.a / (p.alpha * p.L * p.L * m2b))) * sd,
      32.0 * std::min(lt, lt2) * sd,
  };
  return *std::min_element(std::begin(terms), std::end(terms));
}

double rate_slack_gamma(int s, const AssumptionParams& p) {
  require_order(s);
  if (p.theta == 0.0) return 0.0;
  if (s < 4) throw PlanError("theta > 0 requires moment order s >= 4");
  return (1.0 + p.beta) * p.theta / (p.beta * (s - 2));
}

double log_c_gamma(int s, const AssumptionParams& p, int d, double sigma) {
  const auto [delta, lambda] = mlsi_constants(s, p);
  (void)delta;
  const double gamma = rate_slack_gamma(s, p);
  double out = std::log(sigma) / p.beta + (1.0 + 1.0 / p.beta + 2.0 * gamma) * std::log(16.0 * lambda);
  if (gamma > 0.0) {
    const double ld = std::log(static_cast<double>(d));
    const double log_ms = std::log(2.0) + (s / p.alpha) * (std::log((3.0 * p.a + p.b + 3.0) / p.a) +
                                                          std::log(static_cast<double>(s)) + ld);
    const double e = order_exponent(s, p.alpha);
    const double first = log_ms - std::log(16.0) - e * ld;
    const double second = s * std::log(static_cast<double>(s)) - std::log(16.0) + e * log_ratio_3a2b3(p);
    out += gamma * std::max(first, second);
  }
  return out;
}

double kl_accuracy(Metric m, double epsilon, const AssumptionParams& p, int d, double f0) {
  switch (m) {
    case Metric::KL: return epsilon;
    case Metric::TV: return 2.0 * epsilon * epsilon;
    case Metric::W_alpha: {
      const auto [dt, mt] = exp_moment_constants(p, d, f0);
      const double k = 4.0 * p.alpha / p.a * (1.5 + mt * dt);
      return std::pow(epsilon / 4.0, 2.0 * p.alpha) / (k * k);
    }
    case Metric::W2:
      if (p.theta > 0.0) throw PlanError("W2 accuracy requires theta = 0");
      return epsilon * epsilon * p.mu / (16.0 * std::exp(2.0 * p.xi));
  }
  return epsilon;
}

int default_moment_order(int d, double eps_kl, const AssumptionParams& p) {
  const double c = std::ceil(std::log(6.0 * d / eps_kl));
  int s = 2 + 2 * static_cast<int>(std::max(0.0, std::min(c, 1e6)));
  if (p.theta > 0.0) s = std::max(s, 4);
  return s;
}

Plan make_plan(const PotentialSpec& pot, const PlanRequest& req) {
  if (!(req.epsilon > 0.0) || !std::isfinite(req.epsilon)) throw PlanError("epsilon must be positive and finite");
  if (!(req.Delta0 > 0.0) || !std::isfinite(req.Delta0)) throw PlanError("Delta0 must be positive and finite");
  const AssumptionParams& p = pot.params;
  p.validate();
  const int d = pot.dim;
  const double dd = d;

  Plan plan;
  plan.metric = req.metric;
  plan.epsilon = req.epsilon;
  plan.f0 = pot.f_at_zero + req.log_normalizer;
  const double eps = kl_accuracy(req.metric, req.epsilon, p, d, plan.f0);
  plan.epsilon_kl = eps;
  if (!(eps > 0.0)) throw PlanError("KL accuracy underflows to zero");

  const int s = req.s_override ? *req.s_override : default_moment_order(d, eps, p);
  PlannerConstants& c = plan.constants;
  c.s = s;
  const auto ml = mlsi_constants(s, p);
  c.delta = ml.delta;
  c.lambda = ml.lambda;
  c.lambda_tilde = 4.0 * std::exp(2.0 * p.xi) / std::max(1.0, p.mu);
  c.gamma = rate_slack_gamma(s, p);
  c.sigma = sigma_const(p, plan.f0);
  c.log_c_gamma = log_c_gamma(s, p, d, c.sigma);
  c.log_C_s = log_moment_coefficient(s, p, d);
  c.K_s = continuous_Ks(s, p, d);
  const auto em = exp_moment_constants(p, d, plan.f0);
  c.d_tilde = em.d_tilde;
  c.mu_tilde = em.mu_tilde;
  c.Delta0 = req.Delta0;
  c.psi = accuracy_cap_psi(p, d, c.sigma, req.Delta0);

  const double a = p.alpha;
  const double b = p.beta;
  const double g = c.gamma;
  const double ld = std::log(dd);
  const double ldf = log_dim_factor(p, d);
  // Log factors are floored where eps exceeds the range the formulas assume;
  // within the admissible range (eps <= psi <= 2 Delta0 / e) the floors are inactive.
  const double log2de = std::max(1.0, std::log(2.0 * req.Delta0 / eps));
  const double logde = std::max(1.0 - std::log(2.0), std::log(req.Delta0 / eps));
  const double l2e = std::log(2.0 / eps);

  const double log_eta = -(std::log(c.sigma) + c.log_c_gamma) / (1.0 + b) -
                         ((a + p.theta) / (a * b) + g / (b + 1.0)) * ld - ldf / b -
                         (g / (1.0 + b)) * std::log(logde) - (1.0 / b + g / (1.0 + b)) * l2e;
  double log_N = c.log_c_gamma + ((a + p.theta + b * p.theta) / (a * b) + g) * ld + ldf / b +
                 (1.0 + g) * std::log(log2de) + (1.0 / b + g) * l2e;

  plan.eta_formula = std::exp(log_eta);
  plan.eta_cap = p.eta_cap();
  plan.eta = plan.eta_formula;
  if (plan.eta_formula > plan.eta_cap) {
    // Keep the planned horizon eta * N and take more, smaller steps.
    log_N = log_eta + log_N - std::log(plan.eta_cap);
    plan.eta = plan.eta_cap;
    plan.eta_clamped = true;
  }
  plan.log_N = std::max(0.0, log_N);
  if (plan.log_N < 62.0 * std::log(2.0)) {
    plan.N = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::exp(plan.log_N))));
  }

  bool feasible = eps <= c.psi && plan.eta <= plan.eta_cap;
  if (req.metric == Metric::W_alpha) {
    const double k = 4.0 * p.alpha / p.a * (1.5 + c.mu_tilde * c.d_tilde);
    feasible = feasible && req.epsilon <= 4.0 * std::pow(k, 1.0 / p.alpha);
  }
  plan.feasible = feasible;
  return plan;
}

nlohmann::json to_json(const Plan& plan) {
  const PlannerConstants& c = plan.constants;
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["s"] = c.s;
  j["delta"] = c.delta;
  j["lambda"] = c.lambda;
  j["lambda_tilde"] = c.lambda_tilde;
  j["gamma"] = c.gamma;
  j["sigma"] = c.sigma;
  j["log_c_gamma"] = c.log_c_gamma;
  j["log_C_s"] = c.log_C_s;
  j["K_s"] = finite_or_null(c.K_s);
  j["d_tilde"] = c.d_tilde;
  j["mu_tilde"] = c.mu_tilde;
  j["psi"] = c.psi;
  j["Delta0"] = c.Delta0;
  j["eta"] = plan.eta;
  j["eta_formula"] = plan.eta_formula;
  j["eta_cap"] = plan.eta_cap;
  j["eta_clamped"] = plan.eta_clamped;
  j["N"] = plan.N ? nlohmann::json(*plan.N) : nlohmann::json(nullptr);
  j["log_N"] = plan.log_N;
  j["epsilon"] = plan.epsilon;
  j["epsilon_kl"] = plan.epsilon_kl;
  j["metric"] = to_string(plan.metric);
  j["feasible"] = plan.feasible;
  j["f0"] = plan.f0;
  return j;
}

}  // namespace lmc
