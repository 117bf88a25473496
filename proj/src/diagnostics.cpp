#include "lmclab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "lmclab/catalog.hpp"
#include "lmclab/errors.hpp"
#include "lmclab/planner.hpp"
#include "lmclab/rng.hpp"

namespace lmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int severity(Status s) {
  switch (s) {
    case Status::pass: return 0;
    case Status::inconclusive: return 1;
    case Status::fail: return 2;
  }
  return 2;
}

struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

MomentEstimate mean_and_se(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  Accumulator s;
  for (double x : v) s.add(x);
  const double mean = s.value() / n;
  Accumulator q;
  for (double x : v) q.add((x - mean) * (x - mean));
  const double var = v.size() > 1 ? q.value() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double moment_weight(const double* x, Eigen::Index d, double s) {
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) r2 += x[j] * x[j];
  return std::pow(1.0 + r2, 0.5 * s);
}

GridDensity density_from_counts(const GridSpec& g, const std::vector<std::int64_t>& counts, std::int64_t n) {
  const double vol = g.cell_volume();
  const double nd = static_cast<double>(n);
  const double floor = 1.0 / (10.0 * nd * vol * static_cast<double>(g.size()));
  std::vector<double> dens(counts.size());
  Accumulator total;
  for (size_t i = 0; i < counts.size(); ++i) {
    dens[i] = std::max(static_cast<double>(counts[i]) / (nd * vol), floor);
    total.add(dens[i] * vol);
  }
  GridDensity out;
  out.grid = g;
  out.log_Z = std::log(total.value());
  out.log_density.resize(dens.size());
  for (size_t i = 0; i < dens.size(); ++i) out.log_density[i] = std::log(dens[i]) - out.log_Z;
  return out;
}

// Counts per cell; the last entry counts samples outside the box.
std::vector<std::int64_t> cell_counts(const Samples& samples, const GridSpec& g) {
  std::vector<std::int64_t> counts(static_cast<size_t>(g.size()) + 1, 0);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const std::int64_t c = g.locate(samples.row(i).data());
    ++counts[c < 0 ? counts.size() - 1 : static_cast<size_t>(c)];
  }
  return counts;
}

std::vector<Vec> scan_directions(int d, std::uint64_t seed_offset) {
  std::vector<Vec> dirs;
  for (int i = 0; i < d; ++i) {
    for (double s : {1.0, -1.0}) {
      Vec u = Vec::Zero(d);
      u[i] = s;
      dirs.push_back(u);
    }
  }
  if (d > 1) {
    for (int k = 0; k < 64; ++k) {
      Vec u(d);
      for (int j = 0; j < d; ++j) u[j] = 2.0 * halton(static_cast<std::uint64_t>(k) + seed_offset, j) - 1.0;
      if (u.norm() > 1e-6) dirs.push_back(u / u.norm());
    }
  }
  return dirs;
}

// Points on rays from the origin with radii in [r_lo, r_hi]; 1D uses a uniform grid.
template <typename Visit>
void visit_radial(int d, double r_hi, int n, Visit&& visit) {
  if (d == 1) {
    Vec x(1);
    for (int i = 0; i < n; ++i) {
      x[0] = -r_hi + 2.0 * r_hi * i / (n - 1);
      visit(x);
    }
    return;
  }
  for (const Vec& u : scan_directions(d, 101)) {
    for (int i = 0; i <= n / 2; ++i) visit(Vec(u * (r_hi * i / (n / 2))));
  }
}

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::inconclusive: return "inconclusive";
  }
  return "fail";
}

Verdict judge(std::string name, std::string inequality, double value, double bound, double std_error, double tol) {
  Verdict v;
  v.name = std::move(name);
  v.inequality = std::move(inequality);
  v.value = value;
  v.bound = bound;
  v.std_error = std_error;
  v.margin = bound - value;
  const double band = kStdErrorSlack * std_error;
  if (std::isnan(value) || std::isnan(bound)) {
    v.status = Status::fail;
  } else if (value + band <= bound + tol) {
    v.status = Status::pass;
  } else if (value - band > bound + tol) {
    v.status = Status::fail;
  } else {
    v.status = Status::inconclusive;
  }
  return v;
}

Status combine(const std::vector<Verdict>& verdicts) {
  Status worst = Status::pass;
  for (const auto& v : verdicts) {
    if (severity(v.status) > severity(worst)) worst = v.status;
  }
  return worst;
}

MomentEstimate empirical_moment(const Samples& samples, double s) {
  if (samples.rows() == 0) throw DataError("no samples");
  if (!(s >= 0.0)) throw ParamError("moment order must be nonnegative");
  if (s == 0.0) return {1.0, 0.0};
  std::vector<double> h(static_cast<size_t>(samples.rows()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i) h[static_cast<size_t>(i)] = moment_weight(samples.row(i).data(), samples.cols(), s);
  return mean_and_se(h);
}

GridDensity histogram_density(const Samples& samples, const GridSpec& g) {
  g.validate();
  if (samples.cols() != g.dim) throw GridError("sample dimension differs from the grid");
  if (samples.rows() == 0) throw DataError("no samples");
  auto counts = cell_counts(samples, g);
  const std::int64_t outside = counts.back();
  if (static_cast<double>(outside) > 1e-3 * static_cast<double>(samples.rows())) {
    throw GridTooSmall(std::to_string(outside) + " of " + std::to_string(samples.rows()) + " samples fall outside the grid");
  }
  counts.pop_back();
  return density_from_counts(g, counts, samples.rows());
}

Curve kl_convergence_curve(const TrajectoryEnsemble& ens, const GridDensity& nu, int n_boot, std::uint64_t seed,
                           double bound) {
  Curve curve;
  for (const auto& [step, snap] : ens.snapshots) {
    const GridDensity hist = histogram_density(snap, nu.grid);
    const double kl = kl_divergence(hist, nu);
    const auto counts = cell_counts(snap, nu.grid);
    const std::int64_t n = snap.rows();
    std::mt19937_64 gen(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(step + 1)));
    std::vector<double> boot;
    std::vector<std::int64_t> resampled(counts.size() - 1);
    for (int b = 0; b < n_boot; ++b) {
      // Multinomial draw via conditional binomials.
      std::int64_t left = n;
      double p_left = 1.0;
      for (size_t c = 0; c < counts.size(); ++c) {
        const double pc = static_cast<double>(counts[c]) / static_cast<double>(n);
        std::int64_t k = 0;
        if (left > 0 && pc > 0.0) {
          const double q = std::min(1.0, pc / p_left);
          k = q >= 1.0 ? left : std::binomial_distribution<std::int64_t>(left, q)(gen);
        }
        if (c < resampled.size()) resampled[c] = k;
        left -= k;
        p_left -= pc;
        if (p_left <= 0.0) p_left = 0.0;
      }
      boot.push_back(kl_divergence(density_from_counts(nu.grid, resampled, n), nu));
    }
    const double se = boot.size() > 1 ? mean_and_se(boot).std_error * std::sqrt(static_cast<double>(boot.size())) : 0.0;
    curve.push_back({step, kl, se, bound});
  }
  return curve;
}

MomentCheck verify_moment_growth(const TrajectoryEnsemble& ens, const PotentialSpec& p, int s,
                                 double target_moment_value) {
  if (s < 2 || s % 2 != 0) throw ParamError("moment order must be an even integer >= 2");
  const double log_cs = log_moment_coefficient(s, p.params, p.dim);
  const double eta = ens.config.eta;
  const Samples& x0 = ens.snapshots.at(0);
  const auto n = static_cast<size_t>(x0.rows());
  std::vector<double> h0(n);
  for (size_t i = 0; i < n; ++i) h0[i] = moment_weight(x0.row(static_cast<Eigen::Index>(i)).data(), x0.cols(), s);
  const double m0 = mean_and_se(h0).value;

  MomentCheck out;
  std::vector<Verdict> per_step;
  std::vector<double> diff(n);
  for (const auto& [k, xk] : ens.snapshots) {
    for (size_t i = 0; i < n; ++i) {
      diff[i] = moment_weight(xk.row(static_cast<Eigen::Index>(i)).data(), xk.cols(), s) - h0[i];
    }
    const auto dm = mean_and_se(diff);
    const double growth = k == 0 ? 0.0 : std::exp(log_cs + std::log(static_cast<double>(k) * eta));
    const double value = m0 + dm.value + target_moment_value;
    const double bound = m0 + target_moment_value + growth;
    out.curve.push_back({k, value, dm.std_error, bound});
    per_step.push_back(judge("step", "", value, bound, dm.std_error));
  }
  // Report the step with the smallest margin in units of its band; step 0 is tight by construction.
  size_t worst = per_step.size() > 1 ? 1 : 0;
  double worst_score = kInf;
  for (size_t i = worst; i < per_step.size(); ++i) {
    const double band = kStdErrorSlack * per_step[i].std_error;
    const double score = per_step[i].margin - band;
    if (severity(per_step[i].status) > severity(per_step[worst].status) ||
        (severity(per_step[i].status) == severity(per_step[worst].status) && score < worst_score)) {
      worst = i;
      worst_score = score;
    }
  }
  const auto& w = out.curve[worst];
  out.verdict = judge("moment_growth_s" + std::to_string(s), "linear moment growth of LMC iterates", w.value, w.bound,
                      w.std_error);
  out.verdict.status = combine(per_step);
  out.verdict.details = {{"s", s}, {"worst_step", w.step}, {"log_C_s", log_cs}, {"eta", eta},
                         {"target_moment", target_moment_value}, {"initial_moment", m0}};
  return out;
}

bool AssumptionAudit::passed() const {
  const double t = -tolerance;
  return dissipativity_margin >= t && holder_margin >= t && growth_margin >= t &&
         (!hessian_margin || *hessian_margin >= t);
}

AssumptionAudit assumption_audit(const PotentialSpec& p, const AuditOptions& opt) {
  if (!(opt.box_half_width >= 10.0)) throw ParamError("audit box must cover the ball of radius 10");
  const AssumptionParams& c = p.params;
  const int d = p.dim;
  const NoiseStream rng(opt.seed);
  AssumptionAudit out;
  out.tolerance = catalog_constants_fitted(p.name) ? 1e-3 : 1e-6;

  double diss = kInf;
  double growth = kInf;
  double hess = kInf;
  std::int64_t hess_points = 0;
  const bool fd_route = p.comparator && !p.comparator->hessian && d <= 2;
  const bool hess_route = p.comparator && (p.comparator->hessian || fd_route);

  auto check_first_order = [&](const Vec& x) {
    const Vec g = p.grad(x);
    const double r = x.norm();
    diss = std::min(diss, g.dot(x) - c.a * std::pow(r, c.alpha) + c.b);
    growth = std::min(growth, c.M * (1.0 + std::pow(r, c.zeta)) - g.norm());
  };
  auto check_hessian = [&](const Vec& x) {
    if (!hess_route || x.norm() < opt.exclude_radius) return;
    double lmin;
    if (p.comparator->hessian) {
      const Mat H = p.comparator->hessian({x.data(), static_cast<size_t>(d)});
      if (!H.allFinite()) return;  // singular points of the comparator
      Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
      lmin = es.eigenvalues().minCoeff();
    } else {
      lmin = fd_hessian_min_eig(p.comparator->value, x, default_fd_step(x));
    }
    hess = std::min(hess, lmin - c.mu * std::pow(1.0 + 0.25 * x.squaredNorm(), -0.5 * c.theta));
    ++hess_points;
  };

  const double B = opt.box_half_width;
  Vec x(d);
  for (std::int64_t k = 0; k < opt.n_points; ++k) {
    for (int j = 0; j < d; ++j) x[j] = B * (2.0 * halton(static_cast<std::uint64_t>(k), j) - 1.0);
    check_first_order(x);
    check_hessian(x);
  }
  // Rays reach far beyond the box so tail behaviour is seen.
  const auto dirs = scan_directions(d, 0);
  for (const Vec& u : dirs) {
    for (int i = 0; i <= 120; ++i) {
      const Vec y = std::pow(10.0, -3.0 + 6.0 * i / 120.0) * u;
      check_first_order(y);
      if (y.norm() <= B) check_hessian(y);
    }
  }

  double ratio = 0.0;
  const double scales[] = {1e-3, 1.0, 10.0};
  Vec y(d), dir(d);
  for (std::int64_t k = 0; k < opt.n_pairs; ++k) {
    for (int j = 0; j < d; ++j) x[j] = B * (2.0 * rng.uniform(1, static_cast<std::uint64_t>(k * d + j)) - 1.0);
    rng.fill(static_cast<std::uint64_t>(k), 1 << 20, d, dir.data());
    const double nrm = dir.norm();
    if (nrm == 0.0) continue;
    const double r = scales[k % 3];
    y = x + (r / nrm) * dir;
    const double dist = (y - x).norm();
    const double denom = std::pow(dist, c.beta) + (c.beta_hi ? std::pow(dist, *c.beta_hi) : 0.0);
    ratio = std::max(ratio, (p.grad(x) - p.grad(y)).norm() / denom);
  }

  out.dissipativity_margin = diss;
  out.growth_margin = growth;
  out.holder_ratio_max = ratio;
  out.holder_margin = c.L - ratio;
  if (hess_route && hess_points > 0) out.hessian_margin = hess;
  out.scan_domain = {{"box_half_width", B},
                     {"box_points", opt.n_points},
                     {"ray_directions", dirs.size()},
                     {"ray_radius_max", 1e3},
                     {"holder_pairs", opt.n_pairs},
                     {"holder_scales", {1e-3, 1.0, 10.0}},
                     {"hessian_points", hess_points},
                     {"hessian_route", !hess_route ? "none" : (fd_route ? "finite_difference" : "analytic")},
                     {"excluded_radius", opt.exclude_radius},
                     {"seed", opt.seed}};
  if (catalog_constants_fitted(p.name)) {
    out.fitted = {{"a", c.a}, {"b", c.b}, {"M", c.M}, {"L", c.L}, {"mu", c.mu}, {"xi", c.xi}};
  }
  return out;
}

double f_lower_bound_margin(const PotentialSpec& p, double radius, int n) {
  const AssumptionParams& c = p.params;
  const double ratio = (2.0 * c.a + 2.0 * c.b) / c.a;
  const double offset = p.f_at_zero - c.M * ratio * ratio - c.b;
  double worst = kInf;
  visit_radial(p.dim, radius, n, [&](const Vec& x) {
    worst = std::min(worst, p.f(x) - (c.a / (2.0 * c.alpha) * std::pow(x.norm(), c.alpha) + offset));
  });
  return worst;
}

double convex_growth_margin(const PotentialSpec& p, double a, double b, double half_width) {
  double worst = kInf;
  visit_radial(p.dim, half_width, 6001, [&](const Vec& x) { worst = std::min(worst, p.f(x) - a * x.norm() + b); });
  return worst;
}

Verdict verify_mlsi_sweep(const PotentialSpec& p, int s, const GridDensity& nu) {
  const int d = p.dim;
  if (d > 2) throw Unsupported("mLSI sweeps need d <= 2");
  std::vector<double> centers;
  const int per_axis = d == 1 ? 13 : 7;
  for (int i = 0; i < per_axis; ++i) centers.push_back(-3.0 + 6.0 * i / (per_axis - 1));
  const double variances[] = {0.25, 0.5, 1.0, 2.0, 4.0};

  double max_ratio = 0.0;
  nlohmann::json argmax;
  int members = 0;
  const int n_means = d == 1 ? per_axis : per_axis * per_axis;
  for (int mi = 0; mi < n_means; ++mi) {
    const double m[2] = {centers[static_cast<size_t>(mi % per_axis)], d == 2 ? centers[static_cast<size_t>(mi / per_axis)] : 0.0};
    for (double v : variances) {
      auto log_rho = [m, v, d](std::span<const double> x) {
        double q = 0.0;
        for (int k = 0; k < d; ++k) q += (x[k] - m[k]) * (x[k] - m[k]);
        return -0.5 * q / v;
      };
      auto grad_log_rho = [m, v, d](std::span<const double> x, std::span<double> g) {
        for (int k = 0; k < d; ++k) g[k] = -(x[k] - m[k]) / v;
      };
      const GridDensity rho = tabulate(nu.grid, log_rho);
      const double r = mlsi_ratio(rho, grad_log_rho, p, nu, s);
      ++members;
      if (r > max_ratio || argmax.is_null()) {
        max_ratio = std::max(max_ratio, r);
        std::vector<double> mean(m, m + d);
        argmax = {{"mean", mean}, {"variance", v}};
      }
    }
  }
  Verdict out = judge("mlsi_s" + std::to_string(s), "modified log-Sobolev inequality", max_ratio, 1.0, 0.0, 1e-6);
  const auto ml = mlsi_constants(s, p.params);
  out.details = {{"s", s}, {"delta", ml.delta}, {"lambda", ml.lambda}, {"members", members}, {"argmax", argmax}};
  return out;
}

std::vector<Verdict> verify_metric_translations(const GridDensity& rho, const GridDensity& nu, const PotentialSpec& p,
                                                const double kl_scale) {
  const AssumptionParams& c = p.params;
  const double kl = kl_scale * kl_divergence(rho, nu);
  const double tv = tv_distance(rho, nu);
  constexpr double tol = 1e-12;
  std::vector<Verdict> out;
  Verdict pinsker = judge("pinsker", "Pinsker inequality", tv, std::sqrt(0.5 * kl), 0.0, tol);
  pinsker.details = {{"kl", kl}, {"tv", tv}};
  out.push_back(pinsker);

  const auto em = exp_moment_constants(c, p.dim, p.f_at_zero + nu.log_Z);
  // E_rho |x|^alpha on the grid, for the moment-from-KL bound.
  Accumulator moment;
  double x[2];
  for (std::int64_t i = 0; i < rho.grid.size(); ++i) {
    rho.grid.point(i, x);
    const double r = rho.grid.dim == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
    moment.add(std::pow(r, c.alpha) * rho.density(i) * rho.grid.cell_volume());
  }
  Verdict mk = judge("moment_from_kl", "exponential-moment bound on E|x|^alpha", moment.value(),
                     4.0 * c.alpha / c.a * (kl + em.d_tilde * em.mu_tilde), 0.0, tol);
  out.push_back(mk);

  if (rho.grid.dim == 1) {
    const double w = wasserstein_alpha_1d(rho, nu, c.alpha);
    const double B = 2.0 * std::pow(4.0 * (em.d_tilde * em.mu_tilde + 1.5) / c.a, 1.0 / c.alpha);
    Verdict ckp = judge("ckp", "weighted Csiszar-Kullback-Pinsker inequality", w,
                        B * (std::pow(kl, 1.0 / c.alpha) + std::pow(0.5 * kl, 0.5 / c.alpha)), 0.0, tol);
    ckp.details = {{"kl", kl}, {"w_alpha", w}, {"alpha", c.alpha}, {"B", B}};
    out.push_back(ckp);
    if (c.theta == 0.0) {
      const double w2 = wasserstein_alpha_1d(rho, nu, 2.0);
      Verdict tal = judge("talagrand", "Talagrand transport inequality", w2,
                          4.0 * std::exp(c.xi) * std::sqrt(kl / c.mu), 0.0, tol);
      tal.details = {{"kl", kl}, {"w2", w2}};
      out.push_back(tal);
    }
  }
  return out;
}

nlohmann::json to_json(const Verdict& v) {
  auto num = [](double x) -> nlohmann::json {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
  };
  return {{"name", v.name},
          {"inequality", v.inequality},
          {"status", to_string(v.status)},
          {"value", num(v.value)},
          {"bound", num(v.bound)},
          {"std_error", num(v.std_error)},
          {"margin", num(v.margin)},
          {"details", v.details}};
}

nlohmann::json to_json(const AssumptionAudit& a) {
  nlohmann::json j = {{"dissipativity_margin", a.dissipativity_margin},
                      {"holder_ratio_max", a.holder_ratio_max},
                      {"holder_margin", a.holder_margin},
                      {"growth_margin", a.growth_margin},
                      {"tolerance", a.tolerance},
                      {"passed", a.passed()},
                      {"scan_domain", a.scan_domain}};
  j["hessian_margin"] = a.hessian_margin ? nlohmann::json(*a.hessian_margin) : nlohmann::json(nullptr);
  if (!a.fitted.is_null()) j["fitted_constants"] = a.fitted;
  return j;
}

nlohmann::json to_json(const Curve& c) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : c) {
    j.push_back({{"step", p.step},
                 {"value", p.value},
                 {"std_error", p.std_error},
                 {"bound", std::isfinite(p.bound) ? nlohmann::json(p.bound) : nlohmann::json(nullptr)}});
  }
  return j;
}

void write_curve_csv(const Curve& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "step,value,stderr,bound\n" << std::setprecision(17);
  for (const auto& p : c) out << p.step << ',' << p.value << ',' << p.std_error << ',' << p.bound << '\n';
}

}  // namespace lmc
