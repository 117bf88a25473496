#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmclab/catalog.hpp"
#include "lmclab/errors.hpp"
#include "lmclab/potential.hpp"

using namespace lmc;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }
Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

}  // namespace

TEST_CASE("finite-difference gradients of closed-form potentials") {
  const auto g = catalog_get("gaussian", 1);
  CHECK(fd_gradient(g, v1(2.0), 1e-5)[0] == doctest::Approx(2.0).epsilon(1e-8));

  Hyper h;
  h.numbers["alpha"] = 1.5;
  const auto pa = catalog_get("power_alpha", 1, h);
  CHECK(std::abs(fd_gradient(pa, v1(1.0), 1e-6)[0] - 1.5) < 1e-5);

  const auto ph = catalog_get("pseudo_huber", 2);
  const Vec got = fd_gradient(ph, v2(3.0, 4.0), 1e-5);
  CHECK(std::abs(got[0] - 3.0 / std::sqrt(26.0)) < 1e-7);
  CHECK(std::abs(got[1] - 4.0 / std::sqrt(26.0)) < 1e-7);
}

TEST_CASE("finite-difference Hessian minimum eigenvalue") {
  CHECK(std::abs(fd_hessian_min_eig(catalog_get("gaussian", 2), v2(1.0, 1.0), 1e-4) - 1.0) < 1e-4);
  CHECK(std::abs(fd_hessian_min_eig(catalog_get("pseudo_huber", 2), v2(0.0, 0.0), 1e-4) - 1.0) < 1e-4);
  Hyper h;
  h.numbers["alpha"] = 1.5;
  const double expect = 0.75 / std::sqrt(2.0);
  CHECK(std::abs(fd_hessian_min_eig(catalog_get("power_alpha", 1, h), v1(2.0), 1e-4) - expect) < 1e-4);
}

TEST_CASE("parameter validation enforces ranges and the exponent chain") {
  AssumptionParams p;
  CHECK_NOTHROW(p.validate());
  p.zeta = 1.5;  // 2 zeta > alpha
  CHECK_THROWS_AS(p.validate(), ParamError);
  p = {};
  p.beta = 0.0;
  CHECK_THROWS_AS(p.validate(), ParamError);
  p = {};
  p.alpha = 2.5;
  CHECK_THROWS_AS(p.validate(), ParamError);
  p = {};
  p.a = -1.0;
  CHECK_THROWS_AS(p.validate(), ParamError);
}

TEST_CASE("step-size cap is half of 1 and a/(2M^2)") {
  AssumptionParams p;
  CHECK(p.eta_cap() == doctest::Approx(0.25));
  p.a = 8.0;
  p.M = 1.0;
  CHECK(p.eta_cap() == doctest::Approx(0.5));
}

TEST_CASE("bounded perturbations transport constants") {
  Hyper h;
  h.numbers["alpha"] = 1.5;
  const auto base = catalog_get("power_alpha", 1, h);

  const auto big = perturb(base, cos_norm_perturbation(10.0));
  CHECK(big.params.xi == doctest::Approx(base.params.xi + 10.0));
  CHECK(big.params.alpha == base.params.alpha);
  CHECK(big.params.beta == base.params.beta);
  CHECK(big.params.theta == base.params.theta);
  CHECK(big.f(v1(2.0)) == doctest::Approx(base.f(v1(2.0)) + 10.0 * std::cos(2.0)));

  const auto zero = perturb(base, cos_norm_perturbation(0.0));
  CHECK(zero.params.xi == base.params.xi);
  CHECK(zero.params.a == base.params.a);
  CHECK(zero.params.b == base.params.b);
  CHECK(zero.params.L == base.params.L);

  const auto ph = catalog_get("pseudo_huber", 2);
  CHECK_NOTHROW(perturb(ph, cos_norm_perturbation(0.5)));
  CHECK_THROWS_AS(perturb(ph, cos_norm_perturbation(1.5)), PerturbationTooLarge);
}

TEST_CASE("perturbed gradient matches finite differences") {
  Hyper h;
  h.numbers["alpha"] = 1.5;
  const auto p = perturb(catalog_get("power_alpha", 2, h), sin_first_perturbation(1.0));
  for (double x : {-3.0, -0.7, 0.4, 2.5}) {
    const Vec pt = v2(x, 0.5 * x + 1.0);
    const Vec g = p.grad(pt);
    const Vec fd = fd_gradient(p, pt, default_fd_step(pt));
    CHECK((g - fd).norm() <= 1e-5 * (1.0 + g.norm()));
  }
}
