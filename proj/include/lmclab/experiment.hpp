#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmclab/catalog.hpp"
#include "lmclab/planner.hpp"

namespace lmc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int infeasible = 3;
inline constexpr int divergence = 4;
inline constexpr int verification = 5;
inline constexpr int inconclusive = 6;
}  // namespace exit_code

struct ExperimentConfig {
  nlohmann::json raw;  // validated document, used for hashing and manifests

  std::string potential_name;
  int dim = 1;
  Hyper hyper;
  std::optional<std::string> data_csv;
  std::optional<std::string> synthetic_kind;
  int synthetic_n = 0;
  std::uint64_t synthetic_seed = 0;
  std::optional<std::string> perturbation_kind;
  double perturbation_amplitude = 0.0;

  double epsilon = 0.0;
  Metric metric = Metric::KL;
  std::int64_t n_chains = 1;
  std::uint64_t seed = 0;
  std::string output_dir;

  std::optional<double> eta_override;
  std::optional<std::int64_t> N_override;
  std::optional<int> s_override;
  std::optional<double> theta_override;
  nlohmann::json constants = nlohmann::json::object();

  std::optional<std::vector<double>> init_center;
  std::optional<std::vector<std::int64_t>> record_steps;
  int record_count = 8;
  std::string propagation = "auto";
  int histogram_cells = 256;
  std::optional<int> quadrature_cells;

  double audit_box = 10.0;
  std::int64_t audit_points = 20000;
  std::int64_t audit_pairs = 100000;

  std::optional<std::vector<int>> mlsi_orders;
  std::vector<int> moment_orders{2, 4};
  std::int64_t moment_steps = 2000;
  double kl_understatement = 1.0;
};

struct CliOptions {
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

// The shipped JSON schema.
const nlohmann::json& config_schema();

// Checks `doc` against the subset of JSON Schema used by the shipped schema
// (type, enum, required, properties, additionalProperties, items, minItems,
// minimum, exclusiveMinimum). Throws ConfigError naming the offending path.
void validate_schema(const nlohmann::json& doc, const nlohmann::json& schema);

ExperimentConfig parse_config(const nlohmann::json& doc);

/// A config file, or a manifest written by `run` (its config and force flag are reused).
struct LoadedConfig {
  ExperimentConfig config;
  bool from_manifest = false;
  bool manifest_force = false;
};
LoadedConfig load_config(const std::string& path);

// Applies --seed / --output-dir overrides.
ExperimentConfig apply_cli(ExperimentConfig cfg, const CliOptions& cli);

PotentialSpec build_potential(const ExperimentConfig& cfg);

// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

int cmd_plan(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);
int cmd_run(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);
int cmd_audit(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);
// which: mlsi | moments | metrics | all
int cmd_verify(const ExperimentConfig& cfg, const CliOptions& cli, const std::string& which, std::ostream& out);

// Runs `body`, mapping library errors to exit codes and printing them to err.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace lmc
