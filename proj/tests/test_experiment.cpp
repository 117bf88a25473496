#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmclab/errors.hpp"
#include "lmclab/experiment.hpp"

using namespace lmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lmclab_experiment_test" / name;
  fs::remove_all(dir);
  return dir;
}

json base_config(const fs::path& out) {
  return {{"potential", {{"name", "gaussian"}, {"dim", 1}}},
          {"epsilon", 0.05},
          {"metric", "KL"},
          {"n_chains", 2000},
          {"seed", 4},
          {"output_dir", out.string()}};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_guarded(const std::function<int()>& body) {
  std::ostringstream err;
  return guarded(body, err);
}

}  // namespace

TEST_CASE("shipped schema is embedded verbatim") {
  std::ifstream in(std::string(LMCLAB_SOURCE_DIR) + "/config/experiment.schema.json");
  CHECK(config_schema() == json::parse(in));
}

TEST_CASE("schema subset validator") {
  const json schema = json::parse(R"({
    "type": "object", "required": ["n"], "additionalProperties": false,
    "properties": {
      "n": {"type": "integer", "minimum": 1},
      "x": {"type": "number", "exclusiveMinimum": 0},
      "tag": {"type": "string", "enum": ["a", "b"]},
      "list": {"type": "array", "minItems": 1, "items": {"type": "number"}},
      "free": {"type": "object", "additionalProperties": {"type": ["number", "string"]}}
    }})");
  CHECK_NOTHROW(validate_schema(json::parse(R"({"n": 2, "x": 0.5, "tag": "a", "list": [1], "free": {"k": "v"}})"),
                                schema));
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"x": 1})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 0})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1.5})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1, "x": 0})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1, "tag": "c"})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1, "list": []})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1, "list": ["a"]})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1, "free": {"k": true}})"), schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json::parse(R"({"n": 1, "extra": 1})"), schema), ConfigError);
}

TEST_CASE("config parsing") {
  json doc = base_config("out");
  doc["potential"]["hyper"] = {{"alpha", 1.5}};
  doc["potential"]["name"] = "power_alpha";
  doc["overrides"] = {{"eta", 0.01}, {"N", 100}, {"s", 6}};
  doc["init_center"] = {2.0};
  const auto cfg = parse_config(doc);
  CHECK(cfg.potential_name == "power_alpha");
  CHECK(cfg.hyper.numbers.at("alpha") == 1.5);
  CHECK(*cfg.eta_override == 0.01);
  CHECK(*cfg.N_override == 100);
  CHECK(*cfg.s_override == 6);
  CHECK((*cfg.init_center)[0] == 2.0);
  CHECK(cfg.metric == Metric::KL);

  json bad = base_config("out");
  bad["unknown"] = 1;
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = base_config("out");
  bad["potential"]["colour"] = "red";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = base_config("out");
  bad["metric"] = "Hellinger";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = base_config("out");
  bad.erase("seed");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = base_config("out");
  bad["epsilon"] = -1.0;
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = base_config("out");
  bad["init_center"] = {1.0, 2.0};
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = base_config("out");
  bad["potential"]["data"] = json::object();
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("potential construction from a config") {
  json doc = base_config("out");
  doc["potential"] = {{"name", "pseudo_huber"}, {"dim", 1}};
  doc["overrides"] = {{"theta", 2.25}};
  CHECK(build_potential(parse_config(doc)).params.theta == doctest::Approx(2.25));
  doc["overrides"] = {{"theta", 3.5}};
  CHECK_THROWS_AS(build_potential(parse_config(doc)), ConfigError);
  doc["potential"]["name"] = "gaussian";
  doc["overrides"] = {{"theta", 2.25}};
  CHECK_THROWS_AS(build_potential(parse_config(doc)), ConfigError);

  doc = base_config("out");
  doc["potential"]["perturbation"] = {{"kind", "sin_first"}, {"amplitude", 1.0}};
  doc["constants"] = {{"L", 3.0}};
  const auto p = build_potential(parse_config(doc));
  CHECK(p.params.L == 3.0);
  CHECK(p.params.xi == doctest::Approx(1.0));

  doc = base_config("out");
  doc["potential"] = {{"name", "bayes_logistic"},
                      {"dim", 2},
                      {"data", {{"synthetic", {{"kind", "logistic"}, {"n", 50}, {"seed", 2}}}}}};
  CHECK(build_potential(parse_config(doc)).dim == 2);
  doc["potential"]["data"] = {{"csv", std::string(LMCLAB_SOURCE_DIR) + "/config/examples/regression.csv"}};
  doc["potential"]["name"] = "huberized_regression";
  CHECK(build_potential(parse_config(doc)).dim == 2);
}

TEST_CASE("config hash and CLI overrides") {
  const json a = base_config("x");
  json b = a;
  b["seed"] = 5;
  CHECK(config_hash(a) == config_hash(a));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(b));
  CliOptions cli;
  cli.seed = 77;
  cli.output_dir = "elsewhere";
  const auto cfg = apply_cli(parse_config(a), cli);
  CHECK(cfg.seed == 77);
  CHECK(cfg.output_dir == "elsewhere");
  CHECK(cfg.raw["seed"] == 77);
}

TEST_CASE("plan exit codes") {
  std::ostringstream out;
  CHECK(cmd_plan(parse_config(base_config("x")), {}, out) == exit_code::ok);
  CHECK(out.str().find("feasible   yes") != std::string::npos);
  json doc = base_config("x");
  doc["epsilon"] = 10.0;
  CHECK(cmd_plan(parse_config(doc), {}, out) == exit_code::infeasible);
  doc["metric"] = "W2";
  doc["potential"] = {{"name", "power_alpha"}, {"dim", 1}};
  CHECK(run_guarded([&] { return cmd_plan(parse_config(doc), {}, out); }) == exit_code::config);
}

TEST_CASE("run writes a reproducible output directory") {
  const fs::path dir = scratch("run");
  json doc = base_config(dir);
  doc["n_chains"] = 100000;
  const auto cfg = parse_config(doc);
  std::ostringstream out;
  CHECK(cmd_run(cfg, {}, out) == exit_code::ok);
  for (const char* f : {"manifest.json", "plan.json", "report.json", "snapshots.lmce", "snapshots.csv",
                        "curves/kl.csv", "curves/moment_s2.csv", "curves/moment_s4.csv", "curves/target_density.csv"}) {
    INFO(f);
    CHECK(fs::exists(dir / f));
  }
  CHECK_FALSE(fs::exists(dir / ".lock"));
  const json manifest = read_json(dir / "manifest.json");
  CHECK(manifest["config_hash"] == config_hash(cfg.raw));
  CHECK(manifest["flags"]["force"] == false);
  CHECK(manifest["verdict_summary"]["status"] == "pass");
  CHECK(manifest.contains("timestamps"));

  const auto loaded = load_config((dir / "manifest.json").string());
  CHECK(loaded.from_manifest);
  CliOptions cli;
  cli.output_dir = (scratch("rerun")).string();
  CHECK(cmd_run(apply_cli(loaded.config, cli), cli, out) == exit_code::ok);
  CHECK(slurp(dir / "report.json") == slurp(fs::path(*cli.output_dir) / "report.json"));
  CHECK(slurp(dir / "snapshots.lmce") == slurp(fs::path(*cli.output_dir) / "snapshots.lmce"));
}

TEST_CASE("few chains leave the KL target inconclusive") {
  const fs::path dir = scratch("few");
  std::ostringstream out;
  CHECK(cmd_run(parse_config(base_config(dir)), {}, out) == exit_code::inconclusive);
  const json report = read_json(dir / "report.json");
  CHECK(report["summary"]["inconclusive"] == 1);
  CHECK(report["summary"]["fail"] == 0);
}

TEST_CASE("an occupied output directory is refused") {
  const fs::path dir = scratch("locked");
  fs::create_directories(dir);
  std::ofstream(dir / ".lock") << "1\n";
  const auto cfg = parse_config(base_config(dir));
  std::ostringstream out;
  CHECK(run_guarded([&] { return cmd_run(cfg, {}, out); }) == exit_code::config);
  CHECK(fs::exists(dir / ".lock"));
}

TEST_CASE("forcing past the plan is recorded") {
  const fs::path dir = scratch("forced");
  json doc = base_config(dir);
  doc["overrides"] = {{"eta", 0.4}, {"N", 50}};
  const auto cfg = parse_config(doc);
  std::ostringstream out;
  CHECK(run_guarded([&] { return cmd_run(cfg, {}, out); }) == exit_code::config);
  CliOptions cli;
  cli.force = true;
  CHECK(cmd_run(cfg, cli, out) == exit_code::ok);
  const json m = read_json(dir / "manifest.json");
  CHECK(m["flags"]["above_cap"] == true);
  CHECK(m["flags"]["eta_override"] == true);
  CHECK(m["flags"]["N_override"] == true);
  CHECK(m["flags"]["force"] == true);
  const auto reloaded = load_config((dir / "manifest.json").string());
  CHECK(reloaded.manifest_force);

  json infeasible = base_config(scratch("infeasible"));
  infeasible["epsilon"] = 10.0;
  CHECK(cmd_run(parse_config(infeasible), {}, out) == exit_code::infeasible);
}

TEST_CASE("divergence surfaces with its step") {
  const fs::path dir = scratch("diverge");
  json doc = base_config(dir);
  doc["overrides"] = {{"eta", 2.5}, {"N", 5000}};
  doc["n_chains"] = 10;
  CliOptions cli;
  cli.force = true;
  std::ostringstream err;
  const int rc = guarded([&] { return cmd_run(parse_config(doc), cli, std::cout); }, err);
  CHECK(rc == exit_code::divergence);
  CHECK(err.str().find("step") != std::string::npos);
  const json m = read_json(dir / "manifest.json");
  CHECK(m["divergence"]["step"].get<std::int64_t>() > 1);
  CHECK(m["divergence"]["step"].get<std::int64_t>() < 5000);
}

TEST_CASE("audit command") {
  const fs::path dir = scratch("audit");
  json doc = base_config(dir);
  doc["audit"] = {{"n_points", 2000}, {"n_pairs", 5000}};
  std::ostringstream out;
  CHECK(cmd_audit(parse_config(doc), {}, out) == exit_code::ok);
  CHECK(fs::exists(dir / "audit.json"));
  doc["potential"] = {{"name", "power_alpha"}, {"dim", 1}, {"hyper", {{"alpha", 1.5}}}};
  doc["constants"] = {{"L", 0.1}};
  CHECK(cmd_audit(parse_config(doc), {}, out) == exit_code::verification);
  CHECK(read_json(dir / "audit.json")["holder_margin"].get<double>() < 0.0);
}

TEST_CASE("verify command") {
  const fs::path dir = scratch("verify");
  json doc = base_config(dir);
  std::ostringstream out;
  CHECK(cmd_verify(parse_config(doc), {}, "mlsi", out) == exit_code::ok);
  CHECK(cmd_verify(parse_config(doc), {}, "metrics", out) == exit_code::ok);
  doc["verify"] = {{"moment_steps", 200}};
  CHECK(cmd_verify(parse_config(doc), {}, "moments", out) == exit_code::ok);
  const json v = read_json(dir / "verify.json");
  CHECK(v["summary"]["status"] == "pass");
  doc["verify"] = {{"kl_understatement", 2.0}};
  CHECK(cmd_verify(parse_config(doc), {}, "metrics", out) == exit_code::verification);
  CHECK_THROWS_AS(cmd_verify(parse_config(doc), {}, "everything", out), ConfigError);
  doc["potential"]["dim"] = 3;
  CHECK(run_guarded([&] { return cmd_verify(parse_config(doc), {}, "mlsi", out); }) == exit_code::config);
}
