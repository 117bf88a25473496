#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lmclab/potential.hpp"

namespace lmc {

// One row per chain.
using Samples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Propagation {
  step,             // literal LMC recursion
  exact_quadratic,  // closed-form multi-step LMC law for grad f(x) = c x
};

struct LmcConfig {
  double eta = 0.0;
  std::int64_t n_steps = 0;
  std::int64_t n_chains = 1;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> record_steps;  // 0 and n_steps are always added
  bool allow_above_cap = false;
  Propagation propagation = Propagation::step;
};

struct TrajectoryEnsemble {
  std::map<std::int64_t, Samples> snapshots;
  LmcConfig config;
  std::string potential_name;
  int dim = 0;
};

// x - eta * grad + sqrt(2 eta) * noise, written into out. Throws DivergenceError
// tagged with `step` when the result is not finite.
void lmc_step(std::span<const double> x, std::span<const double> grad, double eta, std::span<const double> noise,
              std::span<double> out, std::int64_t step = 0);
Vec lmc_step(const Vec& x, const Vec& grad, double eta, const Vec& noise, std::int64_t step = 0);

// n_chains draws from N(center, I) on the step -1 stream.
Samples init_gaussian(const Vec& center, std::int64_t n_chains, std::uint64_t seed);

// Sorted, deduplicated record steps including 0 and n_steps.
std::vector<std::int64_t> normalized_record_steps(const LmcConfig& cfg);

TrajectoryEnsemble run_ensemble(const PotentialSpec& p, const LmcConfig& cfg, const Samples& init);

// Worker count from LMC_LAB_THREADS (0 or unset means hardware concurrency).
int worker_count();

void write_snapshots_csv(const TrajectoryEnsemble& ens, const std::string& path);
void write_snapshots_binary(const TrajectoryEnsemble& ens, const std::string& path);
// Reads positions back; config fields other than n_chains and record steps are left default.
TrajectoryEnsemble read_snapshots_binary(const std::string& path);

}  // namespace lmc
