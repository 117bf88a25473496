#include "lmclab/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include "lmclab/errors.hpp"
#include "lmclab/rng.hpp"

namespace lmc {

double Hyper::number(const std::string& key, double fallback) const {
  auto it = numbers.find(key);
  return it == numbers.end() ? fallback : it->second;
}

std::string Hyper::option(const std::string& key, const std::string& fallback) const {
  auto it = options.find(key);
  return it == options.end() ? fallback : it->second;
}

namespace {

using Span = std::span<const double>;

double norm2(Span x) {
  double s = 0.0;
  for (double t : x) s += t * t;
  return s;
}

Eigen::Map<const Vec> as_vec(Span x) { return {x.data(), static_cast<Eigen::Index>(x.size())}; }
Eigen::Map<Vec> as_vec(std::span<double> x) { return {x.data(), static_cast<Eigen::Index>(x.size())}; }

/// Radial profile g(r) with derivatives; dg_over_r is g'(r)/r, the
/// tangential Hessian eigenvalue.
struct Radial {
  std::function<double(double)> g;
  std::function<double(double)> dg;
  std::function<double(double)> d2g;
  std::function<double(double)> dg_over_r;

  double value(Span x) const { return g(std::sqrt(norm2(x))); }

  void gradient(Span x, std::span<double> out) const {
    const double r = std::sqrt(norm2(x));
    const double k = r > 0.0 ? dg_over_r(r) : 0.0;
    for (size_t i = 0; i < x.size(); ++i) out[i] = k * x[i];
  }

  Mat hessian(Span x) const {
    const auto d = static_cast<Eigen::Index>(x.size());
    const double r = std::sqrt(norm2(x));
    if (r == 0.0) return d2g(0.0) * Mat::Identity(d, d);
    const Vec u = as_vec(x) / r;
    const double tang = dg_over_r(r);
    return (d2g(r) - tang) * (u * u.transpose()) + tang * Mat::Identity(d, d);
  }

  // Smallest Hessian eigenvalue as a function of the radius.
  double min_eig(double r, int dim) const {
    const double radial = d2g(r);
    return dim == 1 ? radial : std::min(radial, dg_over_r(r));
  }
};

// Dense radial scan: fine linear grid near the origin plus a wide log grid.
const std::vector<double>& radial_scan() {
  static const std::vector<double> grid = [] {
    std::vector<double> r;
    for (int i = 1; i <= 100000; ++i) r.push_back(1e-3 * i);
    for (int i = 0; i <= 4000; ++i) r.push_back(std::pow(10.0, -8.0 + 16.0 * i / 4000.0));
    std::sort(r.begin(), r.end());
    return r;
  }();
  return grid;
}

template <typename F>
double sup_radial(F&& h) {
  double best = -std::numeric_limits<double>::infinity();
  for (double r : radial_scan()) best = std::max(best, h(r));
  return best;
}

Radial gaussian_radial() {
  return {[](double r) { return 0.5 * r * r; }, [](double r) { return r; }, [](double) { return 1.0; },
          [](double) { return 1.0; }};
}

Radial power_radial(double alpha) {
  return {[alpha](double r) { return std::pow(r, alpha); },
          [alpha](double r) { return alpha * std::pow(r, alpha - 1.0); },
          [alpha](double r) { return alpha * (alpha - 1.0) * std::pow(r, alpha - 2.0); },
          [alpha](double r) { return alpha * std::pow(r, alpha - 2.0); }};
}

// (1 + r^2)^(alpha/2)
Radial smooth_power_radial(double alpha) {
  return {[alpha](double r) { return std::pow(1.0 + r * r, 0.5 * alpha); },
          [alpha](double r) { return alpha * r * std::pow(1.0 + r * r, 0.5 * alpha - 1.0); },
          [alpha](double r) {
            return alpha * std::pow(1.0 + r * r, 0.5 * alpha - 2.0) * (1.0 + (alpha - 1.0) * r * r);
          },
          [alpha](double r) { return alpha * std::pow(1.0 + r * r, 0.5 * alpha - 1.0); }};
}

Radial pseudo_huber_radial() {
  return {[](double r) { return std::sqrt(1.0 + r * r); }, [](double r) { return r / std::sqrt(1.0 + r * r); },
          [](double r) { return std::pow(1.0 + r * r, -1.5); },
          [](double r) { return 1.0 / std::sqrt(1.0 + r * r); }};
}

// (1 + r^p)^(1/p) with p = 1 + tau
Radial smoothed_norm_radial(double tau) {
  const double p = 1.0 + tau;
  return {[p](double r) { return std::pow(1.0 + std::pow(r, p), 1.0 / p); },
          [p](double r) { return std::pow(r, p - 1.0) * std::pow(1.0 + std::pow(r, p), 1.0 / p - 1.0); },
          [p, tau](double r) {
            return tau * std::pow(r, p - 2.0) * std::pow(1.0 + std::pow(r, p), 1.0 / p - 2.0);
          },
          [p](double r) { return std::pow(r, p - 2.0) * std::pow(1.0 + std::pow(r, p), 1.0 / p - 1.0); }};
}

// r log(1 + r^2)
Radial norm_log_radial() {
  return {[](double r) { return r * std::log1p(r * r); },
          [](double r) { return std::log1p(r * r) + 2.0 * r * r / (1.0 + r * r); },
          [](double r) {
            const double q = 1.0 + r * r;
            return 2.0 * r / q + 4.0 * r / (q * q);
          },
          [](double r) { return std::log1p(r * r) / r + 2.0 * r / (1.0 + r * r); }};
}

// log(1 + r^2) sqrt(1 + r^2)
Radial norm_log_comparator_radial() {
  return {[](double r) { return std::log1p(r * r) * std::sqrt(1.0 + r * r); },
          [](double r) { return r * (2.0 + std::log1p(r * r)) / std::sqrt(1.0 + r * r); },
          [](double r) {
            const double s = std::sqrt(1.0 + r * r);
            return (2.0 + std::log1p(r * r) + 2.0 * r * r) / (s * s * s);
          },
          [](double r) { return (2.0 + std::log1p(r * r)) / std::sqrt(1.0 + r * r); }};
}

PotentialSpec from_radial(std::string name, int dim, const Radial& rad) {
  PotentialSpec p;
  p.name = std::move(name);
  p.dim = dim;
  p.eval_f = [rad](Span x) { return rad.value(x); };
  p.eval_grad = [rad](Span x, std::span<double> g) { rad.gradient(x, g); };
  p.eval_hess = [rad](Span x) { return rad.hessian(x); };
  p.f_at_zero = rad.g(0.0);
  return p;
}

Comparator radial_comparator(const Radial& rad, double shift = 0.0) {
  return {[rad, shift](Span x) { return rad.value(x) + shift; }, [rad](Span x) { return rad.hessian(x); }};
}

// Largest deficit of <grad f(x), x> against a r^alpha for radial f, plus 10%.
double radial_offset(const Radial& rad, double a, double alpha) {
  const double worst = sup_radial([&](double r) { return a * std::pow(r, alpha) - r * rad.dg(r); });
  return 1.1 * std::max(0.0, worst);
}

void check_keys(std::string_view entry, const Hyper& h, std::set<std::string> numbers,
                std::set<std::string> options = {}) {
  for (const auto& [k, v] : h.numbers) {
    if (!numbers.count(k)) throw ParamError("unknown hyper-parameter '" + k + "' for " + std::string(entry));
    if (!std::isfinite(v)) throw ParamError("hyper-parameter '" + k + "' must be finite");
  }
  for (const auto& [k, v] : h.options) {
    if (!options.count(k)) throw ParamError("unknown option '" + k + "' for " + std::string(entry));
  }
}

double open_unit_interval(const Hyper& h, const std::string& key, double fallback, double lo, double hi) {
  const double v = h.number(key, fallback);
  if (!(v > lo && v < hi)) {
    std::ostringstream os;
    os << key << " = " << v << " must lie in (" << lo << ", " << hi << ")";
    throw ParamError(os.str());
  }
  return v;
}

const Dataset& require_data(std::string_view name, int dim, const Dataset* data) {
  if (!data) throw ParamError(std::string(name) + " requires a dataset");
  if (data->V.cols() != dim) throw ParamError("dataset has " + std::to_string(data->V.cols()) +
                                              " covariates but dim = " + std::to_string(dim));
  if (data->V.rows() != data->Y.size() || data->V.rows() == 0) throw DataError("dataset shape mismatch");
  return *data;
}

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double spectral_norm(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double sum_row_norms(const Mat& V) { return V.rowwise().norm().sum(); }

// ---------------------------------------------------------------------------

PotentialSpec make_gaussian(int dim, const Hyper& h) {
  check_keys("gaussian", h, {});
  PotentialSpec p = from_radial("gaussian", dim, gaussian_radial());
  p.params = {2.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, std::nullopt};
  p.comparator = radial_comparator(gaussian_radial());
  p.isotropic_curvature = 1.0;
  return p;
}

PotentialSpec make_power_alpha(int dim, double alpha) {
  PotentialSpec p = from_radial("power_alpha", dim, power_radial(alpha));
  p.eval_hess = nullptr;  // unbounded at the origin
  AssumptionParams& c = p.params;
  c.alpha = alpha;
  c.a = alpha;  // <grad f(x), x> = alpha |x|^alpha
  c.b = 0.0;
  c.zeta = alpha - 1.0;
  c.M = alpha;
  c.beta = alpha - 1.0;
  c.L = 5.0 * alpha;  // |x|^(alpha-2) x is (alpha-1)-Holder with constant 5
  c.theta = 2.0 - alpha;
  c.mu = 0.5 * alpha * (alpha - 1.0);
  c.xi = 1.0;  // sup (1 + r^2)^(alpha/2) - r^alpha, attained at r = 0
  p.comparator = radial_comparator(smooth_power_radial(alpha));
  return p;
}

PotentialSpec make_pseudo_huber(int dim, const Hyper& h) {
  check_keys("pseudo_huber", h, {"tau"}, {"comparator"});
  const Radial rad = pseudo_huber_radial();
  PotentialSpec p = from_radial("pseudo_huber", dim, rad);
  AssumptionParams& c = p.params;
  c.alpha = 1.0;
  c.a = 1.0;
  c.b = radial_offset(rad, 1.0, 1.0);
  c.zeta = 0.0;
  c.M = 0.5;  // |grad f| < 1 = M (1 + |x|^0)
  c.beta = 1.0;
  c.L = 1.0;
  const std::string cmp = h.option("comparator", "smoothed");
  if (cmp == "self") {
    c.theta = 3.0;
    c.mu = 0.125;  // ((1 + r^2/4) / (1 + r^2))^(3/2) decreases to 1/8
    c.xi = 0.0;
    p.comparator = radial_comparator(rad);
  } else if (cmp == "smoothed") {
    const double tau = open_unit_interval(h, "tau", default_tau(dim), 0.0, 1.0);
    const auto k = smoothed_norm_constants(tau);
    c.theta = k.theta;
    c.mu = k.mu;
    c.xi = k.xi;
    p.comparator = radial_comparator(smoothed_norm_radial(tau));
  } else {
    throw ParamError("comparator must be 'self' or 'smoothed'");
  }
  return p;
}

PotentialSpec make_norm_log(int dim, const Hyper& h) {
  check_keys("norm_log", h, {"zeta"});
  const double zeta = h.number("zeta", 0.5);
  if (!(zeta > 0.0 && zeta <= 0.5)) throw ParamError("zeta must lie in (0, 0.5] for norm_log");
  const Radial rad = norm_log_radial();
  const Radial cmp = norm_log_comparator_radial();
  PotentialSpec p = from_radial("norm_log", dim, rad);
  AssumptionParams& c = p.params;
  c.alpha = 1.0;
  c.a = 1.0;
  c.b = radial_offset(rad, 1.0, 1.0);
  c.zeta = zeta;
  c.M = 1.01 * sup_radial([&](double r) { return rad.dg(r) / (1.0 + std::pow(r, zeta)); });
  c.beta = 1.0;
  c.L = 1.01 * sup_radial([&](double r) { return std::max(std::abs(rad.d2g(r)), std::abs(rad.dg_over_r(r))); });
  c.theta = 1.0;
  c.mu = 0.99 * [&] {
    double m = std::numeric_limits<double>::infinity();
    for (double r : radial_scan()) m = std::min(m, cmp.min_eig(r, dim) * std::sqrt(1.0 + 0.25 * r * r));
    return std::min(m, cmp.min_eig(0.0, dim));
  }();
  c.xi = 1.01 * sup_radial([&](double r) { return std::abs(cmp.g(r) - rad.g(r)); });
  p.comparator = radial_comparator(cmp);
  return p;
}

PotentialSpec make_bridge(int dim, const Hyper& h, const Dataset& data) {
  check_keys("bridge_regression", h, {"q"});
  const double q = open_unit_interval(h, "q", 1.5, 1.0, 2.0);
  auto V = std::make_shared<const Mat>(data.V);
  auto Y = std::make_shared<const Vec>(data.Y);
  PotentialSpec p;
  p.name = "bridge_regression";
  p.dim = dim;
  p.eval_f = [V, Y, q](Span x) {
    const auto xv = as_vec(x);
    double prior = 0.0;
    for (double t : x) prior += std::pow(std::abs(t), q);
    return (*Y - *V * xv).squaredNorm() + prior;
  };
  p.eval_grad = [V, Y, q](Span x, std::span<double> g) {
    const auto xv = as_vec(x);
    auto gv = as_vec(g);
    gv = -2.0 * V->transpose() * (*Y - *V * xv);
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i] != 0.0) gv[static_cast<Eigen::Index>(i)] += q * std::pow(std::abs(x[i]), q - 1.0) * (x[i] > 0 ? 1.0 : -1.0);
    }
  };
  p.f_at_zero = data.Y.squaredNorm();
  const Mat G = data.V.transpose() * data.V;
  Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
  const double lam_min = es.eigenvalues().minCoeff();
  if (!(lam_min > 0.0)) throw ParamError("bridge_regression needs V^T V positive definite");
  const double gnorm = spectral_norm(G);
  const double vty = (data.V.transpose() * data.Y).norm();
  const double root_d = std::sqrt(static_cast<double>(dim));
  AssumptionParams& c = p.params;
  c.alpha = 2.0;
  c.zeta = 1.0;
  c.beta = q - 1.0;
  c.beta_hi = 1.0;
  c.M = 2.0 * vty + 2.0 * gnorm + q * root_d;
  c.L = std::max(2.0 * gnorm, q * std::pow(2.0, 2.0 - q) * std::pow(static_cast<double>(dim), 0.5 * (2.0 - q)));
  c.theta = 0.0;
  c.mu = 2.0 * lam_min;
  c.xi = 0.0;
  // Singular (+inf) on the coordinate hyperplanes, like |t|^q itself.
  p.eval_hess = [V, q](Span x) {
    Mat H = 2.0 * V->transpose() * *V;
    for (size_t i = 0; i < x.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      H(k, k) += q * (q - 1.0) * std::pow(std::abs(x[i]), q - 2.0);
    }
    return H;
  };
  p.comparator = Comparator{p.eval_f, p.eval_hess};
  const auto fit = fit_dissipativity(p, c.alpha);
  c.a = fit.a;
  c.b = fit.b;
  return p;
}

PotentialSpec make_logistic(int dim, const Hyper& h, const Dataset& data) {
  check_keys("bayes_logistic", h, {"q", "tau"}, {"prior"});
  const std::string prior = h.option("prior", "pseudo_huber");
  auto V = std::make_shared<const Mat>(data.V);
  auto Y = std::make_shared<const Vec>(data.Y);
  for (Eigen::Index i = 0; i < data.Y.size(); ++i) {
    if (data.Y[i] != 0.0 && data.Y[i] != 1.0) throw DataError("bayes_logistic responses must be 0 or 1");
  }
  auto likelihood = [V, Y](Span x) {
    const Vec t = *V * as_vec(x);
    double s = -Y->dot(t);
    for (Eigen::Index i = 0; i < t.size(); ++i) s += softplus(t[i]);
    return s;
  };
  auto likelihood_grad = [V, Y](Span x, Eigen::Map<Vec>& g) {
    Vec t = *V * as_vec(x);
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = logistic(t[i]) - (*Y)[i];
    g += V->transpose() * t;
  };
  auto likelihood_hess = [V](Span x) {
    Vec t = *V * as_vec(x);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double s = logistic(t[i]);
      t[i] = s * (1.0 - s);
    }
    return Mat(V->transpose() * t.asDiagonal() * *V);
  };
  const double row_sum = sum_row_norms(data.V);
  const double gnorm = spectral_norm(data.V.transpose() * data.V);

  PotentialSpec p;
  p.name = "bayes_logistic";
  p.dim = dim;
  AssumptionParams& c = p.params;
  if (prior == "pseudo_huber") {
    check_keys("bayes_logistic", h, {"tau"}, {"prior"});
    const double tau = open_unit_interval(h, "tau", default_tau(dim), 0.0, 1.0);
    const Radial ph = pseudo_huber_radial();
    const Radial cmp = smoothed_norm_radial(tau);
    p.eval_f = [ph, likelihood](Span x) { return ph.value(x) - 1.0 + likelihood(x); };
    p.eval_grad = [ph, likelihood_grad](Span x, std::span<double> g) {
      ph.gradient(x, g);
      auto gv = as_vec(g);
      likelihood_grad(x, gv);
    };
    const auto k = smoothed_norm_constants(tau);
    c.alpha = 1.0;
    c.zeta = 0.0;
    c.M = 0.5 * (1.0 + row_sum);
    c.beta = 1.0;
    c.L = 1.0 + 0.25 * gnorm;
    c.theta = k.theta;
    c.mu = k.mu;  // the likelihood Hessian is positive semidefinite
    c.xi = k.xi;
    p.comparator = Comparator{[cmp, likelihood](Span x) { return cmp.value(x) - 1.0 + likelihood(x); },
                              [cmp, likelihood_hess](Span x) { return Mat(cmp.hessian(x) + likelihood_hess(x)); }};
  } else if (prior == "power") {
    check_keys("bayes_logistic", h, {"q"}, {"prior"});
    const double q = open_unit_interval(h, "q", 1.5, 1.0, 2.0);
    p.eval_f = [q, likelihood](Span x) {
      double s = 0.0;
      for (double t : x) s += std::pow(std::abs(t), q);
      return s + likelihood(x);
    };
    p.eval_grad = [q, likelihood_grad](Span x, std::span<double> g) {
      for (size_t i = 0; i < x.size(); ++i) {
        g[i] = x[i] == 0.0 ? 0.0 : q * std::pow(std::abs(x[i]), q - 1.0) * (x[i] > 0 ? 1.0 : -1.0);
      }
      auto gv = as_vec(g);
      likelihood_grad(x, gv);
    };
    const double dd = static_cast<double>(dim);
    c.alpha = q;
    c.zeta = q - 1.0;
    c.M = std::max(q * std::pow(dd, 0.5 * (2.0 - q)), row_sum);
    c.beta = q - 1.0;
    c.L = q * std::pow(2.0, 2.0 - q) * std::pow(dd, 0.5 * (2.0 - q)) + std::max(0.25 * gnorm, 2.0 * row_sum);
    c.theta = 2.0 - q;
    c.mu = 0.5 * q * (q - 1.0);
    c.xi = dd;
    p.comparator = Comparator{
        [q, likelihood](Span x) {
          double s = 0.0;
          for (double t : x) s += std::pow(1.0 + t * t, 0.5 * q);
          return s + likelihood(x);
        },
        [q, likelihood_hess](Span x) {
          Mat H = likelihood_hess(x);
          for (size_t i = 0; i < x.size(); ++i) {
            const double t2 = x[i] * x[i];
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +=
                q * std::pow(1.0 + t2, 0.5 * q - 2.0) * (1.0 + (q - 1.0) * t2);
          }
          return H;
        }};
  } else {
    throw ParamError("bayes_logistic prior must be 'pseudo_huber' or 'power'");
  }
  const Vec zero = Vec::Zero(dim);
  p.f_at_zero = p.f(zero);
  const auto fit = fit_dissipativity(p, c.alpha);
  c.a = fit.a;
  c.b = fit.b;
  return p;
}

PotentialSpec make_huberized(int dim, const Hyper& h, const Dataset& data) {
  check_keys("huberized_regression", h, {"tau"});
  const double tau = open_unit_interval(h, "tau", default_tau(dim), 0.0, 1.0);
  auto V = std::make_shared<const Mat>(data.V);
  auto Y = std::make_shared<const Vec>(data.Y);
  const Radial ph = pseudo_huber_radial();
  const Radial cmp = smoothed_norm_radial(tau);
  auto loss = [V, Y](Span x) {
    const Vec res = *Y - *V * as_vec(x);
    double s = 0.0;
    for (Eigen::Index i = 0; i < res.size(); ++i) s += std::sqrt(1.0 + res[i] * res[i]);
    return s;
  };
  auto loss_hess = [V, Y](Span x) {
    Vec res = *Y - *V * as_vec(x);
    for (Eigen::Index i = 0; i < res.size(); ++i) res[i] = std::pow(1.0 + res[i] * res[i], -1.5);
    return Mat(V->transpose() * res.asDiagonal() * *V);
  };
  PotentialSpec p;
  p.name = "huberized_regression";
  p.dim = dim;
  p.eval_f = [ph, loss](Span x) { return loss(x) + ph.value(x); };
  p.eval_grad = [ph, V, Y](Span x, std::span<double> g) {
    ph.gradient(x, g);
    Vec res = *Y - *V * as_vec(x);
    for (Eigen::Index i = 0; i < res.size(); ++i) res[i] = res[i] / std::sqrt(1.0 + res[i] * res[i]);
    as_vec(g) -= V->transpose() * res;
  };
  const auto k = smoothed_norm_constants(tau);
  AssumptionParams& c = p.params;
  c.alpha = 1.0;
  c.zeta = 0.0;
  c.M = 0.5 * (1.0 + sum_row_norms(data.V));
  c.beta = 1.0;
  c.L = 1.0 + spectral_norm(data.V.transpose() * data.V);
  c.theta = k.theta;
  c.mu = k.mu;
  c.xi = k.xi;
  p.comparator = Comparator{[cmp, loss](Span x) { return loss(x) + cmp.value(x); },
                            [cmp, loss_hess](Span x) { return Mat(cmp.hessian(x) + loss_hess(x)); }};
  const Vec zero = Vec::Zero(dim);
  p.f_at_zero = p.f(zero);
  const auto fit = fit_dissipativity(p, c.alpha);
  c.a = fit.a;
  c.b = fit.b;
  return p;
}

}  // namespace

double default_tau(int dim) { return 1.0 / std::log(6.0 * dim); }

SmoothedNormConstants smoothed_norm_constants(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ParamError("tau must lie in (0, 1)");
  const Radial cmp = smoothed_norm_radial(tau);
  const Radial ph = pseudo_huber_radial();
  const double theta = 2.0 + tau;
  // Hessian floor: the radial eigenvalue is the smaller one for this profile.
  double mu = tau * std::pow(2.0, -theta);  // r -> infinity limit
  for (double r : radial_scan()) mu = std::min(mu, cmp.d2g(r) * std::pow(1.0 + 0.25 * r * r, 0.5 * theta));
  const double xi = sup_radial([&](double r) { return std::abs(cmp.g(r) - ph.g(r)); });
  return {tau, theta, 0.99 * mu, 1.01 * xi};
}

DissipativityFit fit_dissipativity(const PotentialSpec& p, double alpha, double outer_radius,
                                   double box_half_width) {
  const int d = p.dim;
  std::vector<Vec> dirs;
  for (int i = 0; i < d; ++i) {
    for (double s : {1.0, -1.0}) {
      Vec u = Vec::Zero(d);
      u[i] = s;
      dirs.push_back(u);
    }
  }
  const int n_dirs = d == 1 ? 0 : 400 * d;
  for (int k = 0; k < n_dirs; ++k) {
    Vec u(d);
    for (int j = 0; j < d; ++j) u[j] = 2.0 * halton(static_cast<std::uint64_t>(k), j) - 1.0;
    if (u.norm() > 1e-6) dirs.push_back(u / u.norm());
  }
  auto inner = [&](const Vec& x) { return p.grad(x).dot(x); };

  double slope = std::numeric_limits<double>::infinity();
  for (const Vec& u : dirs) slope = std::min(slope, inner(outer_radius * u) / std::pow(outer_radius, alpha));
  if (!(slope > 0.0)) throw ParamError(p.name + " is not dissipative along the scanned directions");
  const double a = 0.9 * slope;

  double worst = 0.0;
  auto visit = [&](const Vec& x) { worst = std::max(worst, a * std::pow(x.norm(), alpha) - inner(x)); };
  for (const Vec& u : dirs) {
    for (int i = 1; i <= 400; ++i) visit(std::pow(10.0, -3.0 + 6.0 * i / 400.0) * u);
    for (int i = 1; i <= 200; ++i) visit((outer_radius * i / 200.0) * u);
  }
  for (int k = 0; k < 4000 * d; ++k) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = box_half_width * (2.0 * halton(static_cast<std::uint64_t>(k) + 7919, j) - 1.0);
    visit(x);
  }
  return {a, 1.1 * worst};
}

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names{"gaussian",     "power_alpha",       "power_alpha_cos",
                                              "pseudo_huber", "norm_log",          "bridge_regression",
                                              "bayes_logistic", "huberized_regression"};
  return names;
}

bool catalog_constants_fitted(std::string_view name) {
  return !(name == "gaussian" || name == "power_alpha" || name == "power_alpha_cos");
}

PotentialSpec catalog_get(std::string_view name, int dim, const Hyper& hyper, const Dataset* data) {
  if (dim < 1) throw ParamError("dimension must be positive");
  PotentialSpec p;
  if (name == "gaussian") {
    p = make_gaussian(dim, hyper);
  } else if (name == "power_alpha") {
    check_keys(name, hyper, {"alpha"});
    p = make_power_alpha(dim, open_unit_interval(hyper, "alpha", 1.5, 1.0, 2.0));
  } else if (name == "power_alpha_cos") {
    check_keys(name, hyper, {"alpha", "amplitude"});
    const double alpha = open_unit_interval(hyper, "alpha", 1.5, 1.0, 2.0);
    const double amp = hyper.number("amplitude", 10.0);
    p = perturb(make_power_alpha(dim, alpha), cos_norm_perturbation(amp));
    p.name = "power_alpha_cos";
  } else if (name == "pseudo_huber") {
    p = make_pseudo_huber(dim, hyper);
  } else if (name == "norm_log") {
    p = make_norm_log(dim, hyper);
  } else if (name == "bridge_regression") {
    p = make_bridge(dim, hyper, require_data(name, dim, data));
  } else if (name == "bayes_logistic") {
    p = make_logistic(dim, hyper, require_data(name, dim, data));
  } else if (name == "huberized_regression") {
    p = make_huberized(dim, hyper, require_data(name, dim, data));
  } else {
    throw CatalogError("unknown potential '" + std::string(name) + "'");
  }
  p.params.validate();
  return p;
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset " + path + " is empty");
  const auto n_cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',') + 1);
  if (n_cols < 2) throw DataError("dataset needs at least one covariate and a response");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw DataError("non-numeric cell '" + cell + "' in " + path);
      }
    }
    if (row.size() != n_cols) throw DataError("ragged row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("dataset " + path + " has no observations");
  Dataset ds;
  ds.V.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cols - 1));
  ds.Y.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j + 1 < n_cols; ++j) ds.V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.Y[static_cast<Eigen::Index>(i)] = rows[i].back();
  }
  return ds;
}

Dataset synthetic_dataset(std::string_view kind, int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw DataError("synthetic dataset needs n >= 1 and d >= 1");
  const NoiseStream noise(seed);
  Dataset ds;
  ds.V.resize(n, d);
  ds.Y.resize(n);
  Vec truth(d);
  for (int j = 0; j < d; ++j) truth[j] = (j % 2 == 0 ? 1.0 : -0.5) / (1.0 + j / 2);
  std::vector<double> z(static_cast<size_t>(d) + 1);
  for (int i = 0; i < n; ++i) {
    noise.fill(static_cast<std::uint64_t>(i), 0, d + 1, z);
    for (int j = 0; j < d; ++j) ds.V(i, j) = z[static_cast<size_t>(j)];
    const double t = ds.V.row(i).dot(truth);
    if (kind == "linear") {
      ds.Y[i] = t + z[static_cast<size_t>(d)];
    } else if (kind == "logistic") {
      ds.Y[i] = noise.uniform(1, static_cast<std::uint64_t>(i)) < logistic(t) ? 1.0 : 0.0;
    } else {
      throw DataError("synthetic dataset kind must be 'linear' or 'logistic'");
    }
  }
  return ds;
}

}  // namespace lmc
