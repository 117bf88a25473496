#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "lmclab/catalog.hpp"
#include "lmclab/errors.hpp"
#include "lmclab/sampler.hpp"

using namespace lmc;

namespace {

struct Moments {
  double mean;
  double var;
};

Moments column_moments(const Samples& s, int col) {
  const double n = static_cast<double>(s.rows());
  const double m = s.col(col).mean();
  const double v = (s.col(col).array() - m).square().sum() / (n - 1.0);
  return {m, v};
}

// Minimal potential with an exploding gradient, to force divergence.
PotentialSpec exploding() {
  PotentialSpec p = catalog_get("gaussian", 1);
  p.name = "exploding";
  p.isotropic_curvature.reset();
  p.eval_grad = [](std::span<const double> x, std::span<double> g) { g[0] = 1e200 * x[0] * std::abs(x[0]) + 1.0; };
  return p;
}

}  // namespace

TEST_CASE("single update") {
  CHECK(lmc_step(Vec::Zero(1), Vec::Zero(1), 0.1, Vec::Zero(1))[0] == 0.0);
  CHECK(lmc_step(Vec::Ones(1), Vec::Ones(1), 0.5, Vec::Zero(1))[0] == 0.5);
  CHECK(lmc_step(Vec::Zero(1), Vec::Zero(1), 0.5, Vec::Constant(1, 1.7))[0] == doctest::Approx(1.7));
  Vec x(2), g(2), z(2);
  x << 1.0, -2.0;
  g << 0.5, 0.25;
  z << 0.3, -0.1;
  const Vec got = lmc_step(x, g, 0.02, z);
  CHECK(got[0] == doctest::Approx(1.0 - 0.01 + 0.2 * 0.3));
  CHECK(got[1] == doctest::Approx(-2.0 - 0.005 - 0.2 * 0.1));
  CHECK_THROWS_AS(lmc_step(Vec::Zero(1), Vec::Constant(1, std::numeric_limits<double>::infinity()), 0.1,
                           Vec::Zero(1), 17),
                  DivergenceError);
}

TEST_CASE("Gaussian initialization") {
  const Samples s = init_gaussian(Vec::Zero(1), 100000, 3);
  const auto m = column_moments(s, 0);
  CHECK(std::abs(m.mean) < 4.0 / std::sqrt(1e5));
  CHECK(std::abs(m.var - 1.0) < 0.02);
  Vec c(2);
  c << 5.0, 5.0;
  const Samples one = init_gaussian(c, 1, 3);
  CHECK(one.rows() == 1);
  CHECK(one.cols() == 2);
  CHECK(one.allFinite());
  CHECK(init_gaussian(Vec::Zero(1), 1000, 3) == init_gaussian(Vec::Zero(1), 1000, 3));
  CHECK(init_gaussian(Vec::Zero(1), 1000, 3) != init_gaussian(Vec::Zero(1), 1000, 4));
}

TEST_CASE("record steps are normalized") {
  LmcConfig cfg;
  cfg.n_steps = 10;
  cfg.record_steps = {5, 3, 5, 12};
  CHECK_THROWS(normalized_record_steps(cfg));
  cfg.record_steps = {5, 3, 5};
  CHECK(normalized_record_steps(cfg) == std::vector<std::int64_t>{0, 3, 5, 10});
}

TEST_CASE("one step from a Gaussian law is Gaussian with the affine moments") {
  const auto p = catalog_get("gaussian", 1);
  for (double m : {0.0, 1.0}) {
    for (double v : {1.0, 4.0}) {
      for (double eta : {0.1, 0.4}) {
        Samples init = init_gaussian(Vec::Zero(1), 100000, 11);
        init = (init.array() * std::sqrt(v) + m).matrix();
        LmcConfig cfg;
        cfg.eta = eta;
        cfg.n_steps = 1;
        cfg.n_chains = init.rows();
        cfg.seed = 12;
        cfg.allow_above_cap = true;
        const auto ens = run_ensemble(p, cfg, init);
        const auto got = column_moments(ens.snapshots.at(1), 0);
        const double mean = (1 - eta) * m;
        const double var = (1 - eta) * (1 - eta) * v + 2 * eta;
        const double n = 1e5;
        CHECK(std::abs(got.mean - mean) < 4.0 * std::sqrt(var / n));
        CHECK(std::abs(got.var - var) < 4.0 * var * std::sqrt(2.0 / (n - 1)));
      }
    }
  }
}

TEST_CASE("zero step size freezes the chains") {
  const auto p = catalog_get("pseudo_huber", 2);
  LmcConfig cfg;
  cfg.eta = 0.0;
  cfg.n_steps = 25;
  cfg.n_chains = 50;
  cfg.record_steps = {7};
  const Samples init = init_gaussian(Vec::Zero(2), 50, 1);
  const auto ens = run_ensemble(p, cfg, init);
  for (const auto& [k, snap] : ens.snapshots) CHECK(snap == init);
}

TEST_CASE("step size above the cap needs an explicit override") {
  const auto p = catalog_get("gaussian", 1);
  LmcConfig cfg;
  cfg.eta = 0.3;
  cfg.n_steps = 2;
  cfg.n_chains = 4;
  const Samples init = init_gaussian(Vec::Zero(1), 4, 1);
  CHECK_THROWS_AS(run_ensemble(p, cfg, init), ConfigError);
  cfg.allow_above_cap = true;
  CHECK_NOTHROW(run_ensemble(p, cfg, init));
}

TEST_CASE("divergence reports the first failing step") {
  LmcConfig cfg;
  cfg.eta = 0.0001;
  cfg.n_steps = 100;
  cfg.n_chains = 8;
  cfg.allow_above_cap = true;
  Samples init = Samples::Constant(8, 1, 1.0);
  try {
    run_ensemble(exploding(), cfg, init);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 100);
  }
}

TEST_CASE("results do not depend on the worker count") {
  Hyper h;
  h.numbers["alpha"] = 1.5;
  const auto p = catalog_get("power_alpha", 2, h);
  LmcConfig cfg;
  cfg.eta = 0.05;
  cfg.n_steps = 200;
  cfg.n_chains = 3001;
  cfg.seed = 99;
  cfg.record_steps = {50, 120};
  const Samples init = init_gaussian(Vec::Constant(2, 1.0), cfg.n_chains, cfg.seed);
  setenv("LMC_LAB_THREADS", "1", 1);
  const auto a = run_ensemble(p, cfg, init);
  setenv("LMC_LAB_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  const auto b = run_ensemble(p, cfg, init);
  unsetenv("LMC_LAB_THREADS");
  REQUIRE(a.snapshots.size() == 4);
  for (const auto& [k, snap] : a.snapshots) CHECK(snap == b.snapshots.at(k));
}

TEST_CASE("exact quadratic propagation has the multi-step law") {
  const auto p = catalog_get("gaussian", 1);
  const double eta = 0.01;
  const std::int64_t N = 300;
  LmcConfig cfg;
  cfg.eta = eta;
  cfg.n_steps = N;
  cfg.n_chains = 100000;
  cfg.seed = 5;
  cfg.propagation = Propagation::exact_quadratic;
  Samples init = init_gaussian(Vec::Zero(1), cfg.n_chains, 4);
  init.array() += 3.0;
  const auto ens = run_ensemble(p, cfg, init);
  const double rho = std::pow(1 - eta, static_cast<double>(N));
  const double mean = 3.0 * rho;
  const double var = rho * rho + 2 * eta * (1 - rho * rho) / (1 - (1 - eta) * (1 - eta));
  const auto got = column_moments(ens.snapshots.at(N), 0);
  CHECK(std::abs(got.mean - mean) < 4.0 * std::sqrt(var / 1e5));
  CHECK(std::abs(got.var - var) < 4.0 * var * std::sqrt(2.0 / 1e5));

  auto q = catalog_get("pseudo_huber", 1);
  CHECK_THROWS(run_ensemble(q, cfg, init));
}

TEST_CASE("snapshot files round-trip") {
  const auto p = catalog_get("gaussian", 2);
  LmcConfig cfg;
  cfg.eta = 0.1;
  cfg.n_steps = 10;
  cfg.n_chains = 17;
  cfg.record_steps = {4};
  const auto ens = run_ensemble(p, cfg, init_gaussian(Vec::Zero(2), 17, 2));
  const auto dir = std::filesystem::temp_directory_path() / "lmclab_sampler_test";
  std::filesystem::create_directories(dir);
  write_snapshots_binary(ens, (dir / "s.lmce").string());
  const auto back = read_snapshots_binary((dir / "s.lmce").string());
  CHECK(back.dim == 2);
  CHECK(back.config.n_chains == 17);
  REQUIRE(back.snapshots.size() == ens.snapshots.size());
  for (const auto& [k, snap] : ens.snapshots) CHECK(back.snapshots.at(k) == snap);

  write_snapshots_csv(ens, (dir / "s.csv").string());
  CHECK(std::filesystem::file_size(dir / "s.csv") > 0);
  {
    std::ofstream out(dir / "bad.lmce", std::ios::binary);
    out << "nope";
  }
  CHECK_THROWS(read_snapshots_binary((dir / "bad.lmce").string()));
  std::filesystem::remove_all(dir);
}
