#include "lmclab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "lmclab/errors.hpp"
#include "lmclab/planner.hpp"

namespace lmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier compensated accumulator.
class Sum {
 public:
  void add(double v) {
    const double t = total_ + v;
    if (std::abs(total_) >= std::abs(v)) {
      comp_ += (total_ - t) + v;
    } else {
      comp_ += (v - t) + total_;
    }
    total_ = t;
  }
  double value() const { return total_ + comp_; }

 private:
  double total_ = 0.0;
  double comp_ = 0.0;
};

// log sum exp(v_i), skipping -inf entries.
double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  if (!std::isfinite(m)) throw NumericalError("non-finite log density on grid");
  Sum s;
  for (double x : v) s.add(std::exp(x - m));
  return m + std::log(s.value());
}

void require_same_grid(const GridDensity& a, const GridDensity& b) {
  if (!(a.grid == b.grid)) throw GridError("densities live on different grids");
}

double eval_at(const ScalarField& f, const double* x, int dim) { return f(std::span<const double>(x, dim)); }

// Inner radius of the box around the origin; zero when the origin is outside.
double inner_radius(const GridSpec& g) {
  double r = kInf;
  for (int k = 0; k < g.dim; ++k) r = std::min({r, -g.lo[k], g.hi[k]});
  return std::max(r, 0.0);
}

// Log of the boundary weight of e^-f on the sphere of radius R (unnormalized).
double log_boundary(const PotentialSpec& p, double R) {
  if (p.dim == 1) {
    const double f1 = p.f(Vec::Constant(1, R));
    const double f2 = p.f(Vec::Constant(1, -R));
    return log_sum_exp({-f1, -f2});
  }
  double best = -kInf;
  Vec x(2);
  for (int k = 0; k < 4096; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 4096.0;
    x << R * std::cos(t), R * std::sin(t);
    best = std::max(best, -p.f(x));
  }
  return best;
}

std::optional<TailBound> ray_tail(const PotentialSpec& p, double R, double log_Z) {
  const AssumptionParams& c = p.params;
  if (!(R > 0.0)) return std::nullopt;
  const double kappa = c.a * std::pow(R, c.alpha - 1.0) - c.b / R;
  if (!(kappa > 0.0)) return std::nullopt;
  return TailBound{p.dim, R, kappa, log_boundary(p, R) - log_Z};
}

}  // namespace

GridSpec GridSpec::line(double lo, double hi, int n) {
  GridSpec g;
  g.dim = 1;
  g.lo = {lo, 0.0};
  g.hi = {hi, 0.0};
  g.n_cells = {n, 1};
  return g;
}

GridSpec GridSpec::square(double lo, double hi, int n) {
  GridSpec g;
  g.dim = 2;
  g.lo = {lo, lo};
  g.hi = {hi, hi};
  g.n_cells = {n, n};
  return g;
}

void GridSpec::validate() const {
  if (dim != 1 && dim != 2) throw GridError("grids are 1D or 2D only");
  for (int k = 0; k < dim; ++k) {
    if (!(lo[k] < hi[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k])) throw GridError("grid bounds must be ordered");
    if (n_cells[k] < 256) throw GridError("grids need at least 256 cells per axis");
  }
}

std::int64_t GridSpec::size() const {
  return dim == 1 ? n_cells[0] : static_cast<std::int64_t>(n_cells[0]) * n_cells[1];
}

double GridSpec::width(int axis) const { return (hi[axis] - lo[axis]) / n_cells[axis]; }

double GridSpec::cell_volume() const { return dim == 1 ? width(0) : width(0) * width(1); }

double GridSpec::center(int axis, std::int64_t i) const { return lo[axis] + (static_cast<double>(i) + 0.5) * width(axis); }

void GridSpec::point(std::int64_t flat, double* out) const {
  if (dim == 1) {
    out[0] = center(0, flat);
  } else {
    out[0] = center(0, flat / n_cells[1]);
    out[1] = center(1, flat % n_cells[1]);
  }
}

std::int64_t GridSpec::locate(const double* x) const {
  std::int64_t idx[2] = {0, 0};
  for (int k = 0; k < dim; ++k) {
    if (!(x[k] >= lo[k] && x[k] < hi[k])) return -1;
    idx[k] = std::min<std::int64_t>(n_cells[k] - 1, static_cast<std::int64_t>((x[k] - lo[k]) / width(k)));
  }
  return dim == 1 ? idx[0] : idx[0] * n_cells[1] + idx[1];
}

bool GridSpec::operator==(const GridSpec& o) const {
  if (dim != o.dim) return false;
  for (int k = 0; k < dim; ++k) {
    if (lo[k] != o.lo[k] || hi[k] != o.hi[k] || n_cells[k] != o.n_cells[k]) return false;
  }
  return true;
}

double TailBound::mass() const {
  const double w = std::exp(log_boundary_weight);
  return dim == 1 ? w / kappa : 2.0 * std::numbers::pi * w * (R / kappa + 1.0 / (kappa * kappa));
}

double TailBound::moment(double s) const {
  const double w = std::exp(log_boundary_weight);
  if (w == 0.0) return 0.0;
  boost::math::quadrature::exp_sinh<double> integrator;
  auto integrand = [&](double t) {
    const double r = R + t;
    const double log_jac = dim == 1 ? 0.0 : std::log(r);
    return std::exp(0.5 * s * std::log1p(r * r) + log_jac - kappa * t);
  };
  const double v = integrator.integrate(integrand, 1e-10);
  return w * v * (dim == 1 ? 1.0 : 2.0 * std::numbers::pi);
}

double GridDensity::density(std::int64_t i) const { return std::exp(log_density[static_cast<size_t>(i)]); }

GridDensity tabulate(const GridSpec& g, const ScalarField& log_density) {
  g.validate();
  GridDensity out;
  out.grid = g;
  out.log_density.resize(static_cast<size_t>(g.size()));
  double x[2];
  for (std::int64_t i = 0; i < g.size(); ++i) {
    g.point(i, x);
    const double v = eval_at(log_density, x, g.dim);
    if (std::isnan(v) || v == kInf) throw NumericalError("invalid log density on grid");
    out.log_density[static_cast<size_t>(i)] = v;
  }
  out.log_Z = log_sum_exp(out.log_density) + std::log(g.cell_volume());
  if (!std::isfinite(out.log_Z)) throw NumericalError("density has no mass on the grid");
  for (double& v : out.log_density) v -= out.log_Z;
  return out;
}

GridDensity normalize(const PotentialSpec& p, const GridSpec& g) {
  if (p.dim > 2) throw Unsupported("grid quadrature is limited to d <= 2");
  if (p.dim != g.dim) throw GridError("grid and potential dimensions differ");
  const ScalarField f = p.eval_f;
  GridDensity out = tabulate(g, [&f](std::span<const double> x) { return -f(x); });
  out.tail = ray_tail(p, inner_radius(g), out.log_Z);
  if (!out.tail) throw GridTooSmall("box too small: the dissipative tail estimate does not apply at its boundary");
  if (!(out.tail->mass() < 1e-10)) {
    throw GridTooSmall("tail mass outside the box may reach " + std::to_string(out.tail->mass()));
  }
  return out;
}

GridSpec auto_grid(const PotentialSpec& p, int n_cells, double tail) {
  if (p.dim > 2) throw Unsupported("grid quadrature is limited to d <= 2");
  const int coarse = p.dim == 1 ? 2048 : 256;
  for (double R = 1.0; R < 1e6; R *= 1.15) {
    const GridSpec g = p.dim == 1 ? GridSpec::line(-R, R, coarse) : GridSpec::square(-R, R, coarse);
    const ScalarField f = p.eval_f;
    const GridDensity rough = tabulate(g, [&f](std::span<const double> x) { return -f(x); });
    const auto t = ray_tail(p, R, rough.log_Z);
    // Margin of 10 on the coarse normalizer.
    if (t && t->mass() * 10.0 < tail) {
      return p.dim == 1 ? GridSpec::line(-R, R, n_cells) : GridSpec::square(-R, R, n_cells);
    }
  }
  throw GridTooSmall("no box up to radius 1e6 contains the target mass");
}

double target_moment(const GridDensity& nu, double s) {
  if (!(s >= 0.0)) throw ParamError("moment order must be nonnegative");
  Sum acc;
  double x[2];
  const double vol = nu.grid.cell_volume();
  for (std::int64_t i = 0; i < nu.grid.size(); ++i) {
    nu.grid.point(i, x);
    const double r2 = nu.grid.dim == 1 ? x[0] * x[0] : x[0] * x[0] + x[1] * x[1];
    acc.add(std::pow(1.0 + r2, 0.5 * s) * nu.density(i) * vol);
  }
  if (nu.tail && s > 0.0) {
    const double corr = nu.tail->moment(s);
    if (!(corr <= 1e-8)) throw GridTooSmall("moment tail correction " + std::to_string(corr) + " exceeds 1e-8");
  }
  return acc.value();
}

double kl_divergence(const GridDensity& rho, const GridDensity& nu) {
  require_same_grid(rho, nu);
  Sum acc;
  const double vol = rho.grid.cell_volume();
  for (size_t i = 0; i < rho.log_density.size(); ++i) {
    const double lr = rho.log_density[i];
    if (lr == -kInf) continue;
    const double ln = nu.log_density[i];
    if (ln == -kInf) return kInf;
    acc.add(std::exp(lr) * (lr - ln) * vol);
  }
  return acc.value();
}

KlFisher kl_and_fisher(const GridDensity& rho, const VectorField& grad_log_rho, const GridDensity& nu,
                       const VectorField& grad_f) {
  require_same_grid(rho, nu);
  const int d = rho.grid.dim;
  Sum fisher;
  double x[2], gr[2], gf[2];
  const double vol = rho.grid.cell_volume();
  for (std::int64_t i = 0; i < rho.grid.size(); ++i) {
    const double w = rho.density(i);
    if (w == 0.0) continue;
    rho.grid.point(i, x);
    grad_log_rho({x, static_cast<size_t>(d)}, {gr, static_cast<size_t>(d)});
    grad_f({x, static_cast<size_t>(d)}, {gf, static_cast<size_t>(d)});
    double n2 = 0.0;
    for (int k = 0; k < d; ++k) n2 += (gr[k] + gf[k]) * (gr[k] + gf[k]);
    fisher.add(w * n2 * vol);
  }
  return {kl_divergence(rho, nu), fisher.value()};
}

double tv_distance(const GridDensity& rho, const GridDensity& nu) {
  require_same_grid(rho, nu);
  Sum acc;
  const double vol = rho.grid.cell_volume();
  for (std::int64_t i = 0; i < rho.grid.size(); ++i) acc.add(std::abs(rho.density(i) - nu.density(i)) * vol);
  return 0.5 * acc.value();
}

namespace {

// Integral over an interval of length len of |g|^alpha for g linear from g0 to g1.
double power_segment(double g0, double g1, double len, double alpha) {
  if (len <= 0.0) return 0.0;
  if (g0 * g1 < 0.0) {
    const double t = g0 / (g0 - g1);
    return len * (t * std::pow(std::abs(g0), alpha) + (1.0 - t) * std::pow(std::abs(g1), alpha)) / (alpha + 1.0);
  }
  const double a0 = std::abs(g0);
  const double a1 = std::abs(g1);
  const double span = std::abs(a1 - a0);
  if (span <= 1e-9 * std::max(a0, a1)) return len * std::pow(0.5 * (a0 + a1), alpha);
  return len * (std::pow(a1, alpha + 1.0) - std::pow(a0, alpha + 1.0)) / ((alpha + 1.0) * (a1 - a0));
}

struct Quantile {
  std::vector<double> cdf;  // cdf[i] at the left edge of cell i, size n+1
  double lo;
  double h;

  explicit Quantile(const GridDensity& g) : lo(g.grid.lo[0]), h(g.grid.width(0)) {
    const auto n = static_cast<size_t>(g.grid.size());
    std::vector<double> mass(n);
    Sum total;
    for (size_t i = 0; i < n; ++i) {
      mass[i] = g.density(static_cast<std::int64_t>(i)) * h;
      total.add(mass[i]);
    }
    const double t = total.value();
    cdf.assign(n + 1, 0.0);
    Sum run;
    for (size_t i = 0; i < n; ++i) {
      run.add(mass[i] / t);
      cdf[i + 1] = run.value();
    }
    cdf[n] = 1.0;
  }

  // Quantile at u within cell i (cdf[i] <= u <= cdf[i+1], nonzero mass).
  double at(size_t i, double u) const {
    const double m = cdf[i + 1] - cdf[i];
    const double frac = std::clamp((u - cdf[i]) / m, 0.0, 1.0);
    return lo + (static_cast<double>(i) + frac) * h;
  }
};

}  // namespace

double wasserstein_alpha_1d(const GridDensity& rho, const GridDensity& nu, double alpha) {
  if (rho.grid.dim != 1 || nu.grid.dim != 1) throw Unsupported("Wasserstein distances are computed in 1D only");
  require_same_grid(rho, nu);
  if (!(alpha >= 1.0)) throw ParamError("alpha must be >= 1");
  const Quantile qa(rho);
  const Quantile qb(nu);
  const size_t n = qa.cdf.size() - 1;
  auto skip_empty = [n](const Quantile& q, size_t i) {
    while (i < n && q.cdf[i + 1] <= q.cdf[i]) ++i;
    return i;
  };
  size_t i = skip_empty(qa, 0);
  size_t j = skip_empty(qb, 0);
  double u = 0.0;
  Sum acc;
  while (i < n && j < n && u < 1.0) {
    const double next = std::min({qa.cdf[i + 1], qb.cdf[j + 1], 1.0});
    if (next > u) {
      acc.add(power_segment(qa.at(i, u) - qb.at(j, u), qa.at(i, next) - qb.at(j, next), next - u, alpha));
      u = next;
    }
    if (qa.cdf[i + 1] <= u) i = skip_empty(qa, i + 1);
    if (qb.cdf[j + 1] <= u) j = skip_empty(qb, j + 1);
  }
  return std::pow(std::max(0.0, acc.value()), 1.0 / alpha);
}

double mlsi_ratio(const GridDensity& rho, const VectorField& grad_log_rho, const PotentialSpec& p,
                  const GridDensity& nu, int s) {
  const auto [delta, lambda] = mlsi_constants(s, p.params);
  const auto [kl, fisher] = kl_and_fisher(rho, grad_log_rho, nu, p.eval_grad);
  if (kl <= 1e-14) return 0.0;
  if (fisher <= 0.0) return kInf;
  const double ms = target_moment(rho, s) + target_moment(nu, s);
  return kl / (lambda * std::pow(fisher, 1.0 - delta) * std::pow(ms, delta));
}

void write_density_csv(const GridDensity& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GridError("cannot write " + path);
  out << (g.grid.dim == 1 ? "x" : "x_1,x_2") << ",log_density\n" << std::setprecision(17);
  double x[2];
  for (std::int64_t i = 0; i < g.grid.size(); ++i) {
    g.grid.point(i, x);
    out << x[0];
    if (g.grid.dim == 2) out << ',' << x[1];
    out << ',' << g.log_density[static_cast<size_t>(i)] << '\n';
  }
}

}  // namespace lmc
