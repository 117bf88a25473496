#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "lmclab/catalog.hpp"
#include "lmclab/errors.hpp"

using namespace lmc;

namespace {

PotentialSpec build(const std::string& name, int d) {
  if (name == "bridge_regression" || name == "huberized_regression") {
    const Dataset ds = synthetic_dataset("linear", 50, d, 3);
    return catalog_get(name, d, {}, &ds);
  }
  if (name == "bayes_logistic") {
    const Dataset ds = synthetic_dataset("logistic", 80, d, 3);
    return catalog_get(name, d, {}, &ds);
  }
  return catalog_get(name, d);
}

}  // namespace

TEST_CASE("stored constants of the closed-form entries") {
  const auto g = catalog_get("gaussian", 1);
  CHECK(g.params.alpha == 2.0);
  CHECK(g.params.a == 1.0);
  CHECK(g.params.b == 0.0);
  CHECK(g.params.zeta == 1.0);
  CHECK(g.params.M == 1.0);
  CHECK(g.params.beta == 1.0);
  CHECK(g.params.L == 1.0);
  CHECK(g.params.theta == 0.0);
  CHECK(g.params.mu == 1.0);
  CHECK(g.params.xi == 0.0);
  CHECK(g.f(Vec::Constant(1, 3.0)) == doctest::Approx(4.5));

  Hyper h;
  h.numbers["alpha"] = 1.5;
  const auto pa = catalog_get("power_alpha", 1, h);
  CHECK(pa.params.theta == doctest::Approx(0.5));
  CHECK(pa.params.beta == doctest::Approx(0.5));
  CHECK(pa.params.zeta == doctest::Approx(0.5));
  CHECK(pa.f(Vec::Constant(1, 4.0)) == doctest::Approx(8.0));

  const auto ph = catalog_get("pseudo_huber", 2);
  CHECK(ph.params.alpha == 1.0);
  CHECK(ph.params.zeta == 0.0);
  CHECK(ph.params.beta == 1.0);
  Vec x(2);
  x << 3.0, 4.0;
  CHECK(ph.f(x) == doctest::Approx(std::sqrt(26.0)));
}

TEST_CASE("every entry's gradient matches finite differences on the box") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  for (const auto& name : catalog_names()) {
    for (int d : {1, 2}) {
      const auto p = build(name, d);
      int bad = 0;
      for (int k = 0; k < 1000; ++k) {
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = unif(rng);
        const Vec g = p.grad(x);
        const Vec fd = fd_gradient(p, x, default_fd_step(x));
        if ((g - fd).norm() > 1e-4 * (1.0 + g.norm())) ++bad;
      }
      INFO(name << " d=" << d);
      CHECK(bad == 0);
    }
  }
}

TEST_CASE("every entry validates its constants") {
  for (const auto& name : catalog_names()) {
    INFO(name);
    CHECK_NOTHROW(build(name, 2).params.validate());
  }
}

TEST_CASE("lookup errors") {
  CHECK_THROWS_AS(catalog_get("no_such_entry", 1), CatalogError);
  Hyper h;
  h.numbers["alhpa"] = 1.5;
  CHECK_THROWS_AS(catalog_get("power_alpha", 1, h), ParamError);
  h = {};
  h.numbers["alpha"] = 2.5;
  CHECK_THROWS_AS(catalog_get("power_alpha", 1, h), ParamError);
  CHECK_THROWS(catalog_get("bridge_regression", 2));
  const Dataset wrong = synthetic_dataset("linear", 20, 3, 1);
  CHECK_THROWS(catalog_get("bridge_regression", 2, {}, &wrong));
}

TEST_CASE("perturbed catalog entry keeps its name") {
  const auto p = catalog_get("power_alpha_cos", 1);
  CHECK(p.name == "power_alpha_cos");
  CHECK(p.params.xi >= 10.0);
}

TEST_CASE("synthetic datasets are deterministic") {
  const Dataset a = synthetic_dataset("logistic", 40, 2, 9);
  const Dataset b = synthetic_dataset("logistic", 40, 2, 9);
  const Dataset c = synthetic_dataset("logistic", 40, 2, 10);
  CHECK(a.V == b.V);
  CHECK(a.Y == b.Y);
  CHECK(a.V != c.V);
  for (int i = 0; i < a.Y.size(); ++i) CHECK((a.Y[i] == 0.0 || a.Y[i] == 1.0));
  CHECK_THROWS(synthetic_dataset("poisson", 10, 1, 0));
}

TEST_CASE("CSV datasets") {
  const auto path = std::filesystem::temp_directory_path() / "lmclab_catalog_test.csv";
  {
    std::ofstream out(path);
    out << "v1,v2,y\n1,2,3\n4,5,6\n";
  }
  const Dataset ds = load_dataset_csv(path.string());
  CHECK(ds.V.rows() == 2);
  CHECK(ds.V.cols() == 2);
  CHECK(ds.V(1, 0) == 4.0);
  CHECK(ds.Y[1] == 6.0);
  {
    std::ofstream out(path);
    out << "v1,y\n1,abc\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(path.string()), DataError);
  {
    std::ofstream out(path);
    out << "v1,y\n1,2,3\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(path.string()), DataError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset_csv(path.string()), DataError);
}

TEST_CASE("smoothed comparator constants") {
  const auto c = smoothed_norm_constants(0.5);
  CHECK(c.theta == doctest::Approx(2.5));
  CHECK(c.mu > 0.0);
  CHECK(c.mu <= std::pow(2.0, -c.theta));
  // sup |(1 + r^1.5)^(2/3) - sqrt(1 + r^2)| is attained near r = 1.
  double sup = 0.0;
  for (double r = 0.0; r < 1e4; r += (r < 10 ? 1e-3 : 1.0)) {
    sup = std::max(sup, std::abs(std::pow(1.0 + std::pow(r, 1.5), 2.0 / 3.0) - std::sqrt(1.0 + r * r)));
  }
  CHECK(c.xi >= sup);
  CHECK(c.xi <= 1.02 * sup);
}

TEST_CASE("fitted dissipativity holds on random points") {
  const auto p = build("huberized_regression", 2);
  const auto fit = fit_dissipativity(p, p.params.alpha);
  CHECK(fit.a > 0.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 20.0);
  for (int k = 0; k < 2000; ++k) {
    Vec x(2);
    x << nd(rng), nd(rng);
    CHECK(p.grad(x).dot(x) >= fit.a * std::pow(x.norm(), p.params.alpha) - fit.b - 1e-9);
  }
}
