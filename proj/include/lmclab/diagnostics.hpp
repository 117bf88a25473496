#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmclab/grid.hpp"
#include "lmclab/potential.hpp"
#include "lmclab/sampler.hpp"

namespace lmc {

// Monte-Carlo checks are judged with this many standard errors of slack.
inline constexpr double kStdErrorSlack = 5.0;
// Histogram KL bias floor for 10^6 draws on 256 cells; widens end-to-end tolerances.
inline constexpr double kHistogramBiasFloor = 0.003;

enum class Status { pass, fail, inconclusive };
std::string to_string(Status s);

struct Verdict {
  std::string name;
  std::string inequality;  // human-readable name of the inequality under test
  Status status = Status::pass;
  double value = 0.0;
  double bound = 0.0;
  double std_error = 0.0;
  double margin = 0.0;  // bound - value
  nlohmann::json details = nlohmann::json::object();
};

// Pass when value + k se <= bound + tol, fail when value - k se > bound + tol,
// inconclusive in between.
Verdict judge(std::string name, std::string inequality, double value, double bound, double std_error,
              double tol = 0.0);
// Worst status across verdicts (fail over inconclusive over pass).
Status combine(const std::vector<Verdict>& verdicts);

struct MomentEstimate {
  double value;
  double std_error;
};

// Mean and standard error of (1 + |x|^2)^(s/2) over the rows.
MomentEstimate empirical_moment(const Samples& samples, double s);

// Histogram on the grid with a floor of 1/(10 n vol n_cells) per cell, renormalized.
// Throws GridTooSmall when more than 0.1% of the samples fall outside.
GridDensity histogram_density(const Samples& samples, const GridSpec& g);

struct CurvePoint {
  std::int64_t step;
  double value;
  double std_error;
  double bound;
};
using Curve = std::vector<CurvePoint>;

// Histogram KL to the oracle at every recorded step, with bootstrap standard
// errors from n_boot multinomial resamples of the chains.
Curve kl_convergence_curve(const TrajectoryEnsemble& ens, const GridDensity& nu, int n_boot = 200,
                           std::uint64_t seed = 0, double bound = std::numeric_limits<double>::quiet_NaN());

struct MomentCheck {
  Verdict verdict;
  Curve curve;  // value = M_s(rho_k) + M_s(target), bound = M_s(rho_0) + M_s(target) + C_s k eta
};

// Linear moment-growth bound at every recorded step. Standard errors are
// paired per chain, so step 0 carries no Monte-Carlo error.
MomentCheck verify_moment_growth(const TrajectoryEnsemble& ens, const PotentialSpec& p, int s,
                                 double target_moment_value);

struct AuditOptions {
  double box_half_width = 10.0;
  std::int64_t n_points = 20000;
  std::int64_t n_pairs = 100000;
  std::uint64_t seed = 0;
  double exclude_radius = 1e-3;
};

struct AssumptionAudit {
  double dissipativity_margin = 0.0;
  double holder_ratio_max = 0.0;
  double holder_margin = 0.0;  // L - holder_ratio_max
  double growth_margin = 0.0;
  std::optional<double> hessian_margin;  // empty when no Hessian route exists
  double tolerance = 0.0;
  nlohmann::json scan_domain;
  nlohmann::json fitted;  // constants that came from scans, for the record

  bool passed() const;
};

AssumptionAudit assumption_audit(const PotentialSpec& p, const AuditOptions& opt = {});

// min over a radial grid (1D: [-radius, radius]) of f(x) minus the dissipative
// lower bound (a/2alpha)|x|^alpha + f(0) - M((2a+2b)/a)^2 - b.
double f_lower_bound_margin(const PotentialSpec& p, double radius = 30.0, int n = 60001);

// min over a grid of f(x) - a|x| + b, the convex linear-growth check.
double convex_growth_margin(const PotentialSpec& p, double a, double b, double half_width = 30.0);

// Max mLSI ratio over Gaussian test densities N(m, vI), m on a grid in
// [-3, 3]^d, v in {1/4, 1/2, 1, 2, 4}. Passes when <= 1 + 1e-6.
Verdict verify_mlsi_sweep(const PotentialSpec& p, int s, const GridDensity& nu);

// Pinsker, CKP, Talagrand (theta = 0 only) and moment-from-KL checks for one
// pair. kl_scale multiplies the KL before checking (1 = honest).
std::vector<Verdict> verify_metric_translations(const GridDensity& rho, const GridDensity& nu,
                                                const PotentialSpec& p, double kl_scale = 1.0);

nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const AssumptionAudit& a);
nlohmann::json to_json(const Curve& c);
void write_curve_csv(const Curve& c, const std::string& path);

}  // namespace lmc
