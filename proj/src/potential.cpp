#include "lmclab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "lmclab/errors.hpp"

namespace lmc {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ParamError(msg);
}

}  // namespace

void AssumptionParams::validate() const {
  require(alpha >= 1.0 && alpha <= 2.0, "alpha must lie in [1, 2]");
  require(a > 0.0, "a must be positive");
  require(b >= 0.0, "b must be nonnegative");
  require(zeta >= 0.0, "zeta must be nonnegative");
  require(M > 0.0, "M must be positive");
  require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
  require(L > 0.0, "L must be positive");
  require(theta >= 0.0, "theta must be nonnegative");
  require(mu > 0.0, "mu must be positive");
  require(xi >= 0.0, "xi must be nonnegative");
  const double top = beta_hi ? std::max(beta, *beta_hi) : beta;
  if (beta_hi) require(*beta_hi > beta && *beta_hi <= 1.0, "beta_hi must lie in (beta, 1]");
  constexpr double slack = 1e-12;
  require(2.0 * zeta <= alpha + slack, "need 2 zeta <= alpha");
  require(alpha <= zeta + 1.0 + slack, "need alpha <= zeta + 1");
  require(zeta <= top + slack, "need zeta <= beta");
}

double AssumptionParams::eta_cap() const { return 0.5 * std::min(1.0, a / (2.0 * M * M)); }

Vec PotentialSpec::grad(const Vec& x) const {
  Vec g(x.size());
  eval_grad({x.data(), static_cast<size_t>(x.size())}, {g.data(), static_cast<size_t>(g.size())});
  return g;
}

PotentialSpec perturb(const PotentialSpec& base, const PerturbationSpec& pert) {
  const AssumptionParams& p = base.params;
  if (!(pert.kappa1 >= 0.0 && pert.kappa2 >= 0.0 && pert.L_phi >= 0.0) ||
      !std::isfinite(pert.kappa1) || !std::isfinite(pert.kappa2) || !std::isfinite(pert.L_phi)) {
    throw ParamError("perturbation bounds must be finite and nonnegative");
  }
  const bool linear_tail = p.alpha <= 1.0;
  if (linear_tail && pert.kappa2 >= p.a) {
    std::ostringstream os;
    os << "perturbation gradient bound " << pert.kappa2 << " must be strictly below a = " << p.a
       << " for linear tails";
    throw PerturbationTooLarge(os.str());
  }

  AssumptionParams q = p;
  q.xi = p.xi + pert.kappa1;
  q.L = p.L + pert.L_phi;
  q.M = p.M + pert.kappa2;
  if (pert.kappa2 > 0.0) {
    if (linear_tail) {
      q.a = p.a - pert.kappa2;
    } else {
      // a r^alpha - b - k r >= (a/2) r^alpha - b', with b' absorbing the
      // maximum of k r - (a/2) r^alpha, attained at r* = (2k/(a alpha))^(1/(alpha-1)).
      q.a = 0.5 * p.a;
      const double r_star = std::pow(2.0 * pert.kappa2 / (p.a * p.alpha), 1.0 / (p.alpha - 1.0));
      const double slack = pert.kappa2 * r_star - 0.5 * p.a * std::pow(r_star, p.alpha);
      q.b = p.b + std::max(0.0, slack);
    }
  }

  PotentialSpec out;
  out.name = base.name + "+" + pert.name;
  out.dim = base.dim;
  out.params = q;
  out.comparator = base.comparator;
  auto f0 = base.eval_f;
  auto g0 = base.eval_grad;
  auto phi = pert.phi;
  auto gphi = pert.grad_phi;
  out.eval_f = [f0, phi](std::span<const double> x) { return f0(x) + phi(x); };
  out.eval_grad = [g0, gphi, d = base.dim](std::span<const double> x, std::span<double> g) {
    g0(x, g);
    double buf[16];
    std::vector<double> heap;
    std::span<double> extra;
    if (d <= 16) {
      extra = std::span<double>(buf, static_cast<size_t>(d));
    } else {
      heap.resize(static_cast<size_t>(d));
      extra = heap;
    }
    gphi(x, extra);
    for (int i = 0; i < d; ++i) g[static_cast<size_t>(i)] += extra[static_cast<size_t>(i)];
  };
  const Vec zero = Vec::Zero(base.dim);
  out.f_at_zero = out.f(zero);
  return out;
}

PerturbationSpec cos_norm_perturbation(double amplitude) {
  PerturbationSpec p;
  std::ostringstream os;
  os << amplitude << "cos|x|";
  p.name = os.str();
  p.phi = [amplitude](std::span<const double> x) {
    double r2 = 0.0;
    for (double t : x) r2 += t * t;
    return amplitude * std::cos(std::sqrt(r2));
  };
  p.grad_phi = [amplitude](std::span<const double> x, std::span<double> g) {
    double r2 = 0.0;
    for (double t : x) r2 += t * t;
    const double r = std::sqrt(r2);
    // -amplitude sin(r) x / r, with sin(r)/r -> 1 at the origin
    const double s = r > 1e-8 ? std::sin(r) / r : 1.0 - r2 / 6.0;
    for (size_t i = 0; i < x.size(); ++i) g[i] = -amplitude * s * x[i];
  };
  p.kappa1 = std::abs(amplitude);
  p.kappa2 = std::abs(amplitude);
  p.L_phi = 2.0 * std::abs(amplitude);
  return p;
}

PerturbationSpec sin_first_perturbation(double amplitude) {
  PerturbationSpec p;
  std::ostringstream os;
  os << amplitude << "sin(x1)";
  p.name = os.str();
  p.phi = [amplitude](std::span<const double> x) { return amplitude * std::sin(x[0]); };
  p.grad_phi = [amplitude](std::span<const double> x, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = amplitude * std::cos(x[0]);
  };
  p.kappa1 = std::abs(amplitude);
  p.kappa2 = std::abs(amplitude);
  p.L_phi = 2.0 * std::abs(amplitude);
  return p;
}

double default_fd_step(const Vec& x) { return 1e-5 * (1.0 + x.norm()); }

Vec fd_gradient(const PotentialSpec& p, const Vec& x, double h) {
  if (!(h > 0.0)) throw ParamError("finite-difference step must be positive");
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = p.f(xp);
    xp[i] = x[i] - h;
    const double fm = p.f(xp);
    xp[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericalError("non-finite potential value in fd_gradient");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double fd_hessian_min_eig(const ScalarField& f, const Vec& x, double h) {
  if (!(h > 0.0)) throw ParamError("finite-difference step must be positive");
  const Eigen::Index d = x.size();
  if (d > 3) throw Unsupported("dense finite-difference Hessian is limited to d <= 3");
  auto at = [&](const Vec& y) {
    const double v = f({y.data(), static_cast<size_t>(y.size())});
    if (!std::isfinite(v)) throw NumericalError("non-finite potential value in fd_hessian_min_eig");
    return v;
  };
  Mat H(d, d);
  const double f0 = at(x);
  Vec y = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    y[i] = x[i] + h;
    const double fp = at(y);
    y[i] = x[i] - h;
    const double fm = at(y);
    y[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      double s = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          y[i] = x[i] + si * h;
          y[j] = x[j] + sj * h;
          s += si * sj * at(y);
        }
      }
      y[i] = x[i];
      y[j] = x[j];
      H(i, j) = H(j, i) = s / (4.0 * h * h);
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double fd_hessian_min_eig(const PotentialSpec& p, const Vec& x, double h) {
  return fd_hessian_min_eig(p.eval_f, x, h);
}

}  // namespace lmc
