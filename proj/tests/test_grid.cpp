#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "lmclab/catalog.hpp"
#include "lmclab/errors.hpp"
#include "lmclab/grid.hpp"

using namespace lmc;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

PotentialSpec laplace() {
  PotentialSpec p;
  p.name = "laplace";
  p.dim = 1;
  p.eval_f = [](std::span<const double> x) { return std::abs(x[0]); };
  p.eval_grad = [](std::span<const double> x, std::span<double> g) { g[0] = x[0] > 0 ? 1.0 : -1.0; };
  p.params.alpha = 1.0;
  p.params.a = 1.0;
  p.params.b = 0.0;
  p.params.zeta = 0.0;
  return p;
}

PotentialSpec power15(int d = 1) {
  Hyper h;
  h.numbers["alpha"] = 1.5;
  return catalog_get("power_alpha", d, h);
}

GridDensity gaussian_on(const GridSpec& g, double m, double v) {
  return tabulate(g, [m, v](std::span<const double> x) { return -0.5 * (x[0] - m) * (x[0] - m) / v; });
}

double mass(const GridDensity& g) {
  double s = 0.0;
  for (std::int64_t i = 0; i < g.grid.size(); ++i) s += g.density(i);
  return s * g.grid.cell_volume();
}

}  // namespace

TEST_CASE("grid geometry") {
  const GridSpec g = GridSpec::square(-2.0, 2.0, 256);
  CHECK(g.size() == 256 * 256);
  CHECK(g.cell_volume() == doctest::Approx(std::pow(4.0 / 256, 2)));
  double x[2];
  for (std::int64_t i : {std::int64_t{0}, std::int64_t{257}, g.size() - 1}) {
    g.point(i, x);
    CHECK(g.locate(x) == i);
  }
  const double outside[2] = {2.5, 0.0};
  CHECK(g.locate(outside) == -1);
  CHECK_THROWS_AS(GridSpec::line(-1.0, 1.0, 100).validate(), GridError);
  CHECK_THROWS_AS(GridSpec::line(1.0, -1.0, 512).validate(), GridError);
}

TEST_CASE("Gaussian normalizer") {
  const auto nu = normalize(catalog_get("gaussian", 1), GridSpec::line(-10, 10, 4096));
  CHECK(std::abs(nu.log_Z - 0.5 * std::log(2 * kPi)) < 1e-8);
  CHECK(std::abs(mass(nu) - 1.0) < 1e-8);
  const auto nu2 = normalize(catalog_get("gaussian", 2), GridSpec::square(-10, 10, 512));
  CHECK(std::abs(nu2.log_Z - std::log(2 * kPi)) < 1e-8);
}

TEST_CASE("Laplace normalizer") {
  // Midpoint error at the kink is h^2/12, so 1e-8 needs a fine grid.
  const auto nu = normalize(laplace(), GridSpec::line(-30, 30, 1 << 18));
  CHECK(std::abs(nu.log_Z - std::log(2.0)) < 1e-8);
  const auto coarse = normalize(laplace(), GridSpec::line(-30, 30, 4096));
  CHECK(std::abs(coarse.log_Z - std::log(2.0)) < 1e-4);
}

TEST_CASE("stretched-exponential normalizer") {
  const auto p = power15();
  const GridSpec g = auto_grid(p, 1 << 18);
  const auto nu = normalize(p, g);
  CHECK(std::abs(nu.log_Z - std::log(2.0 * std::tgamma(1.0 + 1.0 / 1.5))) < 1e-8);
}

TEST_CASE("box too small for the tail") {
  CHECK_THROWS_AS(normalize(catalog_get("gaussian", 1), GridSpec::line(-3, 3, 1024)), GridTooSmall);
  const GridSpec g = auto_grid(catalog_get("gaussian", 1), 1024);
  CHECK(g.hi[0] < 12.0);
  CHECK_NOTHROW(normalize(catalog_get("gaussian", 1), g));
  for (const char* name : {"pseudo_huber", "norm_log", "power_alpha_cos"}) {
    for (int d : {1, 2}) {
      INFO(name << " d=" << d);
      const auto p = catalog_get(name, d);
      CHECK_NOTHROW(normalize(p, auto_grid(p, d == 1 ? 2048 : 256)));
    }
  }
}

TEST_CASE("moments of the target") {
  const auto nu = normalize(catalog_get("gaussian", 1), GridSpec::line(-12, 12, 4096));
  CHECK(std::abs(target_moment(nu, 2.0) - 2.0) < 1e-6);
  CHECK(std::abs(target_moment(nu, 4.0) - (1.0 + 2.0 + 3.0)) < 1e-6);
  CHECK(std::abs(target_moment(nu, 0.0) - 1.0) < 1e-8);
  const auto p = power15();
  const auto pa = normalize(p, auto_grid(p, 8192));
  const double a = p.params.a, b = p.params.b;
  CHECK(target_moment(pa, 4.0) <= std::pow((a + b + 3) / a, 4 / 1.5) * std::pow(4.0, 4 / 1.5));
  CHECK(std::abs(target_moment(pa, 0.0) - 1.0) < 1e-8);
}

TEST_CASE("Gaussian KL and Fisher information") {
  const GridSpec g = GridSpec::line(-12, 12, 4096);
  const auto nu = normalize(catalog_get("gaussian", 1), g);
  const auto grad_f = catalog_get("gaussian", 1).eval_grad;
  for (double m : {0.5, 1.0, 2.0}) {
    const auto rho = gaussian_on(g, m, 1.0);
    const auto r = kl_and_fisher(
        rho, [m](std::span<const double> x, std::span<double> out) { out[0] = -(x[0] - m); }, nu, grad_f);
    CHECK(std::abs(r.kl - 0.5 * m * m) < 1e-6);
    CHECK(std::abs(r.fisher - m * m) < 1e-6);
  }
  const auto same = kl_and_fisher(
      nu, [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; }, nu, grad_f);
  CHECK(std::abs(same.kl) < 1e-10);
  CHECK(std::abs(same.fisher) < 1e-10);
}

TEST_CASE("KL to a stretched-exponential target converges under refinement") {
  const auto p = power15();
  const double R = auto_grid(p, 256).hi[0];
  auto kl_at = [&](int n) {
    const GridSpec g = GridSpec::line(-R, R, n);
    return kl_divergence(gaussian_on(g, 0.5, 0.8), normalize(p, g));
  };
  const double fine = kl_at(1 << 16);
  CHECK(std::abs(kl_at(1 << 17) - fine) < 1e-6);
  CHECK(fine > 0.0);
}

TEST_CASE("KL is nonnegative and vanishes only on equal densities") {
  const GridSpec g = GridSpec::line(-10, 10, 1024);
  const auto nu = gaussian_on(g, 0.0, 1.0);
  CHECK(kl_divergence(nu, nu) == 0.0);
  for (double m : {-1.0, 0.001, 0.3}) {
    for (double v : {0.5, 1.0, 2.0}) {
      if (m == 0.0 && v == 1.0) continue;
      const auto rho = gaussian_on(g, m, v);
      CHECK(kl_divergence(rho, nu) > 0.0);
      // Pinsker on the grid.
      CHECK(tv_distance(rho, nu) <= std::sqrt(kl_divergence(rho, nu) / 2.0));
    }
  }
}

TEST_CASE("total variation") {
  const GridSpec g = GridSpec::line(-12, 12, 8192);
  const auto a = gaussian_on(g, 0.0, 1.0);
  const auto b = gaussian_on(g, 1.0, 1.0);
  CHECK(std::abs(tv_distance(a, b) - std::erf(0.5 / std::sqrt(2.0))) < 1e-5);
  CHECK(tv_distance(a, a) == 0.0);
  const auto left = tabulate(g, [](std::span<const double> x) { return x[0] < 0 ? 0.0 : kNegInf; });
  const auto right = tabulate(g, [](std::span<const double> x) { return x[0] > 0 ? 0.0 : kNegInf; });
  CHECK(std::abs(tv_distance(left, right) - 1.0) < 1e-8);
  CHECK(kl_divergence(left, right) == std::numeric_limits<double>::infinity());
}

TEST_CASE("Wasserstein distances in one dimension") {
  const GridSpec g = GridSpec::line(-14, 14, 8192);
  const auto a = gaussian_on(g, 0.0, 1.0);
  const auto b = gaussian_on(g, 1.0, 1.0);
  for (double alpha : {1.0, 1.5, 2.0}) CHECK(std::abs(wasserstein_alpha_1d(a, b, alpha) - 1.0) < 1e-4);
  CHECK(wasserstein_alpha_1d(a, a, 1.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(wasserstein_alpha_1d(a, gaussian_on(g, 0.0, 4.0), 2.0) - 1.0) < 1e-3);
}

TEST_CASE("refinement leaves distances unchanged") {
  const auto p = catalog_get("gaussian", 1);
  auto at = [&](int n) {
    const GridSpec g = GridSpec::line(-12, 12, n);
    const auto nu = normalize(p, g);
    const auto rho = gaussian_on(g, 0.5, 0.8);
    return std::array<double, 3>{kl_divergence(rho, nu), tv_distance(rho, nu), wasserstein_alpha_1d(rho, nu, 2.0)};
  };
  const auto c = at(1 << 15);
  const auto f = at(1 << 16);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(c[k] - f[k]) < 1e-6);
}

TEST_CASE("mLSI ratio on the Gaussian family") {
  const GridSpec g = GridSpec::line(-12, 12, 4096);
  const auto p = catalog_get("gaussian", 1);
  const auto nu = normalize(p, g);
  for (double m : {-2.0, 0.5, 1.0}) {
    const auto rho = gaussian_on(g, m, 1.0);
    const double r =
        mlsi_ratio(rho, [m](std::span<const double> x, std::span<double> out) { out[0] = -(x[0] - m); }, p, nu, 2);
    CHECK(std::abs(r - 0.125) < 1e-6);
  }
  CHECK(mlsi_ratio(nu, [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; }, p, nu, 2) == 0.0);
}

TEST_CASE("density CSV export") {
  const auto nu = normalize(catalog_get("gaussian", 2), GridSpec::square(-9, 9, 256));
  const auto path = std::filesystem::temp_directory_path() / "lmclab_density.csv";
  write_density_csv(nu, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("log_density") != std::string::npos);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 256u * 256u);
  std::filesystem::remove(path);
}
