#include "lmclab/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "lmclab/diagnostics.hpp"
#include "lmclab/errors.hpp"
#include "lmclab/grid.hpp"
#include "lmclab/sampler.hpp"
#include "schema_text.hpp"

namespace lmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kArtifactVersion = "lmc_lab 1.0.0";

std::string join_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "number") return v.is_number();
  if (t == "integer") return v.is_number_integer();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

void validate_node(const json& v, const json& s, const std::string& path) {
  const std::string where = path.empty() ? "config" : path;
  if (s.contains("type")) {
    const json& t = s["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(v, t.get<std::string>());
    } else {
      for (const auto& alt : t) ok = ok || type_matches(v, alt.get<std::string>());
    }
    if (!ok) throw ConfigError(where + ": expected type " + t.dump());
  }
  if (s.contains("enum")) {
    const auto& e = s["enum"];
    if (std::find(e.begin(), e.end(), v) == e.end()) throw ConfigError(where + ": value " + v.dump() + " not in " + e.dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s["minimum"].get<double>()) {
      throw ConfigError(where + ": must be >= " + s["minimum"].dump());
    }
    if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>()) {
      throw ConfigError(where + ": must be > " + s["exclusiveMinimum"].dump());
    }
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& k : s["required"]) {
        if (!v.contains(k.get<std::string>())) throw ConfigError(where + ": missing required key '" + k.get<std::string>() + "'");
      }
    }
    const json props = s.value("properties", json::object());
    for (const auto& [k, child] : v.items()) {
      if (props.contains(k)) {
        validate_node(child, props[k], join_path(path, k));
      } else if (s.contains("additionalProperties")) {
        const json& extra = s["additionalProperties"];
        if (extra.is_boolean()) {
          if (!extra.get<bool>()) throw ConfigError(where + ": unknown key '" + k + "'");
        } else {
          validate_node(child, extra, join_path(path, k));
        }
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<size_t>()) {
      throw ConfigError(where + ": needs at least " + s["minItems"].dump() + " items");
    }
    if (s.contains("items")) {
      for (size_t i = 0; i < v.size(); ++i) validate_node(v[i], s["items"], path + "[" + std::to_string(i) + "]");
    }
  }
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Exclusive lock on an output directory for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw ConfigError("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                        " if it is stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) { /* the pid is informational only */ }
    ::close(fd);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

Vec init_center_of(const ExperimentConfig& cfg) {
  if (!cfg.init_center) return Vec::Zero(cfg.dim);
  if (static_cast<int>(cfg.init_center->size()) != cfg.dim) throw ConfigError("init_center must have dim entries");
  return Eigen::Map<const Vec>(cfg.init_center->data(), cfg.dim);
}

json params_json(const AssumptionParams& p) {
  json j = {{"alpha", p.alpha}, {"a", p.a}, {"b", p.b},         {"zeta", p.zeta}, {"M", p.M},
            {"beta", p.beta},   {"L", p.L}, {"theta", p.theta}, {"mu", p.mu},     {"xi", p.xi}};
  if (p.beta_hi) j["beta_hi"] = *p.beta_hi;
  return j;
}

int status_exit(Status s) {
  switch (s) {
    case Status::pass: return exit_code::ok;
    case Status::fail: return exit_code::verification;
    case Status::inconclusive: return exit_code::inconclusive;
  }
  return exit_code::verification;
}

json verdict_list(const std::vector<Verdict>& vs) {
  json j = json::array();
  for (const auto& v : vs) j.push_back(to_json(v));
  return j;
}

json summary_of(const std::vector<Verdict>& vs) {
  int counts[3] = {0, 0, 0};
  for (const auto& v : vs) ++counts[static_cast<int>(v.status)];
  return {{"status", to_string(combine(vs))},
          {"pass", counts[static_cast<int>(Status::pass)]},
          {"fail", counts[static_cast<int>(Status::fail)]},
          {"inconclusive", counts[static_cast<int>(Status::inconclusive)]}};
}

void print_verdicts(const std::vector<Verdict>& vs, std::ostream& out) {
  for (const auto& v : vs) {
    out << std::left << std::setw(14) << to_string(v.status) << std::setw(22) << v.name << " value "
        << std::setprecision(6) << v.value << "  bound " << v.bound;
    if (v.std_error > 0.0) out << "  se " << v.std_error;
    out << '\n';
  }
}

// Symmetric box for oracle work: auto-sized, widened to at least `min_half`.
GridSpec oracle_grid(const PotentialSpec& p, int cells, double min_half) {
  GridSpec g = auto_grid(p, cells);
  const double R = std::max(g.hi[0], min_half);
  return p.dim == 1 ? GridSpec::line(-R, R, cells) : GridSpec::square(-R, R, cells);
}

int default_quadrature_cells(const ExperimentConfig& cfg) {
  return cfg.quadrature_cells ? *cfg.quadrature_cells : (cfg.dim == 1 ? 4096 : 512);
}

struct Prepared {
  PotentialSpec potential;
  Vec center;
  std::optional<GridDensity> target;  // histogram-resolution oracle, d <= 2
  double log_Z = 0.0;
  Plan plan;
};

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared out{build_potential(cfg), init_center_of(cfg), std::nullopt, 0.0, {}};
  if (cfg.dim <= 2) {
    const double reach = out.center.cwiseAbs().maxCoeff() + 6.0;
    out.target = normalize(out.potential, oracle_grid(out.potential, cfg.histogram_cells, reach));
    out.log_Z = out.target->log_Z;
  }
  PlanRequest req;
  req.epsilon = cfg.epsilon;
  req.metric = cfg.metric;
  req.s_override = cfg.s_override;
  req.log_normalizer = out.log_Z;
  req.Delta0 = delta0_gaussian(out.potential, out.center, out.log_Z);
  out.plan = make_plan(out.potential, req);
  return out;
}

void print_plan(const ExperimentConfig& cfg, const Plan& plan, std::ostream& out) {
  const auto& c = plan.constants;
  out << std::setprecision(6);
  out << "potential  " << cfg.potential_name << " (d=" << cfg.dim << ")\n";
  out << "metric     " << to_string(plan.metric) << "  epsilon " << plan.epsilon << "  (KL accuracy " << plan.epsilon_kl
      << ")\n";
  out << "s          " << c.s << "  gamma " << c.gamma << "  delta " << c.delta << "  lambda " << c.lambda << '\n';
  out << "psi        " << c.psi << "  Delta0 " << c.Delta0 << "  sigma " << c.sigma << '\n';
  out << "eta        " << plan.eta << "  (cap " << plan.eta_cap << (plan.eta_clamped ? ", clamped" : "") << ")\n";
  out << "N          ";
  if (plan.N) {
    out << *plan.N << '\n';
  } else {
    out << "exp(" << plan.log_N << ")\n";
  }
  out << "feasible   " << (plan.feasible ? "yes" : "no") << '\n';
}

std::vector<std::int64_t> default_records(std::int64_t N, int count) {
  std::vector<std::int64_t> r;
  for (int i = 0; i <= count; ++i) r.push_back(static_cast<std::int64_t>(std::llround(static_cast<double>(N) * i / count)));
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

// Config without its output location, so relocated reruns hash the same.
std::string content_hash(const ExperimentConfig& cfg) {
  json j = cfg.raw;
  j.erase("output_dir");
  return config_hash(j);
}

}  // namespace

const json& config_schema() {
  static const json schema = json::parse(detail::kSchemaText);
  return schema;
}

void validate_schema(const json& doc, const json& schema) { validate_node(doc, schema, ""); }

ExperimentConfig parse_config(const json& doc) {
  validate_schema(doc, config_schema());
  ExperimentConfig c;
  c.raw = doc;
  const json& pot = doc["potential"];
  c.potential_name = pot["name"].get<std::string>();
  c.dim = pot["dim"].get<int>();
  if (pot.contains("hyper")) {
    for (const auto& [k, v] : pot["hyper"].items()) {
      if (v.is_string()) {
        c.hyper.options[k] = v.get<std::string>();
      } else {
        c.hyper.numbers[k] = v.get<double>();
      }
    }
  }
  if (pot.contains("data")) {
    const json& d = pot["data"];
    if (d.contains("csv") == d.contains("synthetic")) throw ConfigError("potential.data needs exactly one of csv, synthetic");
    if (d.contains("csv")) c.data_csv = d["csv"].get<std::string>();
    if (d.contains("synthetic")) {
      c.synthetic_kind = d["synthetic"]["kind"].get<std::string>();
      c.synthetic_n = d["synthetic"]["n"].get<int>();
      c.synthetic_seed = d["synthetic"].value("seed", std::uint64_t{0});
    }
  }
  if (pot.contains("perturbation")) {
    c.perturbation_kind = pot["perturbation"]["kind"].get<std::string>();
    c.perturbation_amplitude = pot["perturbation"]["amplitude"].get<double>();
  }
  c.epsilon = doc["epsilon"].get<double>();
  c.metric = parse_metric(doc["metric"].get<std::string>());
  c.n_chains = doc["n_chains"].get<std::int64_t>();
  c.seed = doc["seed"].get<std::uint64_t>();
  c.output_dir = doc["output_dir"].get<std::string>();
  if (doc.contains("overrides")) {
    const json& o = doc["overrides"];
    if (o.contains("eta")) c.eta_override = o["eta"].get<double>();
    if (o.contains("N")) c.N_override = o["N"].get<std::int64_t>();
    if (o.contains("s")) c.s_override = o["s"].get<int>();
    if (o.contains("theta")) c.theta_override = o["theta"].get<double>();
  }
  if (doc.contains("constants")) c.constants = doc["constants"];
  if (doc.contains("init_center")) c.init_center = doc["init_center"].get<std::vector<double>>();
  if (doc.contains("record_steps")) c.record_steps = doc["record_steps"].get<std::vector<std::int64_t>>();
  c.record_count = doc.value("record_count", 8);
  c.propagation = doc.value("propagation", std::string("auto"));
  if (doc.contains("grid")) {
    c.histogram_cells = doc["grid"].value("histogram_cells", 256);
    if (doc["grid"].contains("quadrature_cells")) c.quadrature_cells = doc["grid"]["quadrature_cells"].get<int>();
  }
  if (doc.contains("audit")) {
    const json& a = doc["audit"];
    c.audit_box = a.value("box_half_width", 10.0);
    c.audit_points = a.value("n_points", std::int64_t{20000});
    c.audit_pairs = a.value("n_pairs", std::int64_t{100000});
  }
  if (doc.contains("verify")) {
    const json& v = doc["verify"];
    if (v.contains("mlsi_orders")) c.mlsi_orders = v["mlsi_orders"].get<std::vector<int>>();
    if (v.contains("moment_orders")) c.moment_orders = v["moment_orders"].get<std::vector<int>>();
    c.moment_steps = v.value("moment_steps", std::int64_t{2000});
    c.kl_understatement = v.value("kl_understatement", 1.0);
  }
  if (c.init_center && static_cast<int>(c.init_center->size()) != c.dim) {
    throw ConfigError("init_center must have dim entries");
  }
  return c;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  LoadedConfig out;
  if (doc.is_object() && doc.contains("artifact_version") && doc.contains("config")) {
    out.from_manifest = true;
    out.manifest_force = doc.value("flags", json::object()).value("force", false);
    out.config = parse_config(doc["config"]);
  } else {
    out.config = parse_config(doc);
  }
  return out;
}

ExperimentConfig apply_cli(ExperimentConfig cfg, const CliOptions& cli) {
  if (cli.seed) {
    cfg.seed = *cli.seed;
    cfg.raw["seed"] = *cli.seed;
  }
  if (cli.output_dir) {
    cfg.output_dir = *cli.output_dir;
    cfg.raw["output_dir"] = *cli.output_dir;
  }
  return cfg;
}

PotentialSpec build_potential(const ExperimentConfig& cfg) {
  std::optional<Dataset> data;
  if (cfg.data_csv) data = load_dataset_csv(*cfg.data_csv);
  if (cfg.synthetic_kind) data = synthetic_dataset(*cfg.synthetic_kind, cfg.synthetic_n, cfg.dim, cfg.synthetic_seed);

  Hyper hyper = cfg.hyper;
  if (cfg.theta_override) {
    // theta = 2 + tau for the smoothed linear-tail comparators.
    const bool linear_tail = cfg.potential_name == "pseudo_huber" || cfg.potential_name == "huberized_regression" ||
                             (cfg.potential_name == "bayes_logistic" && hyper.option("prior", "pseudo_huber") == "pseudo_huber");
    if (!linear_tail) throw ConfigError("overrides.theta applies only to linear-tail entries with a smoothed comparator");
    if (hyper.numbers.count("tau")) throw ConfigError("set either overrides.theta or hyper.tau, not both");
    const double tau = *cfg.theta_override - 2.0;
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("overrides.theta must lie in (2, 3)");
    hyper.numbers["tau"] = tau;
  }
  PotentialSpec p = catalog_get(cfg.potential_name, cfg.dim, hyper, data ? &*data : nullptr);
  if (cfg.perturbation_kind) {
    const auto pert = *cfg.perturbation_kind == "cos_norm" ? cos_norm_perturbation(cfg.perturbation_amplitude)
                                                          : sin_first_perturbation(cfg.perturbation_amplitude);
    p = perturb(p, pert);
  }
  if (!cfg.constants.empty()) {
    AssumptionParams& c = p.params;
    const std::pair<const char*, double*> fields[] = {{"alpha", &c.alpha}, {"a", &c.a},         {"b", &c.b},
                                                      {"zeta", &c.zeta},   {"M", &c.M},         {"beta", &c.beta},
                                                      {"L", &c.L},         {"theta", &c.theta}, {"mu", &c.mu},
                                                      {"xi", &c.xi}};
    for (const auto& [key, slot] : fields) {
      if (cfg.constants.contains(key)) *slot = cfg.constants[key].get<double>();
    }
    c.validate();
  }
  return p;
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

int cmd_plan(const ExperimentConfig& cfg, const CliOptions&, std::ostream& out) {
  const Prepared prep = prepare(cfg);
  print_plan(cfg, prep.plan, out);
  json j = to_json(prep.plan);
  j["normalizer"] = cfg.dim <= 2 ? json(prep.log_Z) : json("unavailable");
  out << j.dump(2) << '\n';
  return prep.plan.feasible ? exit_code::ok : exit_code::infeasible;
}

int cmd_run(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out) {
  const fs::path dir(cfg.output_dir);
  DirLock lock(dir);
  const std::string started = utc_now();
  Prepared prep = prepare(cfg);
  const PotentialSpec& p = prep.potential;
  const Plan& plan = prep.plan;
  print_plan(cfg, plan, out);

  if (!plan.feasible && !cli.force) {
    out << "plan is infeasible; rerun with --force to sample anyway\n";
    return exit_code::infeasible;
  }
  LmcConfig lc;
  lc.eta = cfg.eta_override ? *cfg.eta_override : plan.eta;
  if (cfg.N_override) {
    lc.n_steps = *cfg.N_override;
  } else if (plan.N) {
    lc.n_steps = *plan.N;
  } else {
    throw ConfigError("planned N overflows 63 bits; set overrides.N");
  }
  const bool above_cap = lc.eta > p.params.eta_cap();
  if (above_cap && !cli.force) throw ConfigError("eta above the stability cap requires --force");
  lc.allow_above_cap = above_cap;
  lc.n_chains = cfg.n_chains;
  lc.seed = cfg.seed;
  lc.record_steps = cfg.record_steps ? *cfg.record_steps : default_records(lc.n_steps, cfg.record_count);
  const double work = static_cast<double>(lc.n_steps) * static_cast<double>(lc.n_chains);
  if (cfg.propagation == "exact" || (cfg.propagation == "auto" && p.isotropic_curvature && work > 2e9)) {
    lc.propagation = Propagation::exact_quadratic;
  }

  json flags = {{"force", cli.force},
                {"eta_override", cfg.eta_override.has_value()},
                {"N_override", cfg.N_override.has_value()},
                {"above_cap", above_cap},
                {"propagation", lc.propagation == Propagation::exact_quadratic ? "exact_quadratic" : "step"}};
  json manifest = {{"artifact_version", kArtifactVersion},
                   {"config", cfg.raw},
                   {"config_hash", config_hash(cfg.raw)},
                   {"seed", cfg.seed},
                   {"plan", to_json(plan)},
                   {"flags", flags},
                   {"threads", worker_count()}};
  write_json(dir / "plan.json", to_json(plan));

  const Samples init = init_gaussian(prep.center, lc.n_chains, lc.seed);
  TrajectoryEnsemble ens;
  try {
    ens = run_ensemble(p, lc, init);
  } catch (const DivergenceError& e) {
    manifest["timestamps"] = {{"started", started}, {"finished", utc_now()}};
    manifest["divergence"] = {{"step", e.step()}, {"message", e.what()}};
    manifest["verdict_summary"] = {{"status", "diverged"}};
    write_json(dir / "manifest.json", manifest);
    throw;
  }

  std::vector<Verdict> verdicts;
  json report = {{"artifact_version", kArtifactVersion},
                 {"config_hash", content_hash(cfg)},
                 {"potential", {{"name", p.name}, {"dim", p.dim}, {"params", params_json(p.params)}}},
                 {"plan", to_json(plan)},
                 {"run", {{"eta", lc.eta}, {"n_steps", lc.n_steps}, {"n_chains", lc.n_chains}, {"seed", lc.seed},
                          {"record_steps", ens.config.record_steps}, {"flags", flags}}}};
  fs::create_directories(dir / "curves");
  if (prep.target) {
    const GridDensity& nu = *prep.target;
    write_density_csv(nu, (dir / "curves" / "target_density.csv").string());
    const bool guarantee = plan.feasible && !cfg.eta_override && !cfg.N_override && cfg.metric == Metric::KL;
    const double kl_bound = plan.epsilon_kl + kHistogramBiasFloor;
    const Curve kl = kl_convergence_curve(ens, nu, 200, cfg.seed, guarantee ? kl_bound : plan.constants.Delta0);
    write_curve_csv(kl, (dir / "curves" / "kl.csv").string());
    report["kl_curve"] = to_json(kl);
    Verdict init_v = judge("init_bound", "initial KL bound for a Gaussian start", kl.front().value,
                           plan.constants.Delta0, kl.front().std_error);
    verdicts.push_back(init_v);
    if (guarantee) {
      Verdict v = judge("kl_target", "KL accuracy after the planned steps", kl.back().value, kl_bound,
                        kl.back().std_error);
      v.details = {{"epsilon_kl", plan.epsilon_kl}, {"bias_floor", kHistogramBiasFloor}, {"step", kl.back().step}};
      verdicts.push_back(v);
    }
    json moments = json::object();
    for (int s : {2, 4}) {
      const auto mc = verify_moment_growth(ens, p, s, target_moment(nu, s));
      write_curve_csv(mc.curve, (dir / "curves" / ("moment_s" + std::to_string(s) + ".csv")).string());
      moments[std::to_string(s)] = to_json(mc.curve);
      verdicts.push_back(mc.verdict);
    }
    report["moment_curves"] = moments;
  } else {
    report["oracle"] = "unavailable for d > 2";
  }
  report["verdicts"] = verdict_list(verdicts);
  report["summary"] = summary_of(verdicts);

  write_json(dir / "report.json", report);
  write_snapshots_binary(ens, (dir / "snapshots.lmce").string());
  if (static_cast<double>(lc.n_chains) * static_cast<double>(ens.snapshots.size()) <= 1e6) {
    write_snapshots_csv(ens, (dir / "snapshots.csv").string());
  }
  manifest["timestamps"] = {{"started", started}, {"finished", utc_now()}};
  manifest["verdict_summary"] = report["summary"];
  write_json(dir / "manifest.json", manifest);

  print_verdicts(verdicts, out);
  return status_exit(combine(verdicts));
}

int cmd_audit(const ExperimentConfig& cfg, const CliOptions&, std::ostream& out) {
  const PotentialSpec p = build_potential(cfg);
  AuditOptions opt;
  opt.box_half_width = cfg.audit_box;
  opt.n_points = cfg.audit_points;
  opt.n_pairs = cfg.audit_pairs;
  opt.seed = cfg.seed;
  const AssumptionAudit audit = assumption_audit(p, opt);
  json j = to_json(audit);
  j["potential"] = {{"name", p.name}, {"dim", p.dim}, {"params", params_json(p.params)}};
  out << std::setprecision(6) << "dissipativity margin  " << audit.dissipativity_margin << '\n'
      << "holder ratio max      " << audit.holder_ratio_max << "  (L = " << p.params.L << ")\n"
      << "growth margin         " << audit.growth_margin << '\n'
      << "hessian margin        ";
  if (audit.hessian_margin) {
    out << *audit.hessian_margin << '\n';
  } else {
    out << "n/a\n";
  }
  out << "tolerance             " << audit.tolerance << "\n" << (audit.passed() ? "PASS" : "FAIL") << '\n';
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / "audit.json", j);
  return audit.passed() ? exit_code::ok : exit_code::verification;
}

int cmd_verify(const ExperimentConfig& cfg, const CliOptions&, const std::string& which, std::ostream& out) {
  if (which != "mlsi" && which != "moments" && which != "metrics" && which != "all") {
    throw ConfigError("verify suite must be one of mlsi, moments, metrics, all");
  }
  const PotentialSpec p = build_potential(cfg);
  if (p.dim > 2) throw Unsupported("verification suites need d <= 2");
  const bool all = which == "all";
  const int cells = default_quadrature_cells(cfg);
  std::vector<Verdict> verdicts;
  json suites = json::object();

  if (all || which == "mlsi") {
    const GridDensity nu = normalize(p, oracle_grid(p, cells, 12.0));
    std::vector<int> orders = cfg.mlsi_orders ? *cfg.mlsi_orders
                                              : (p.params.theta == 0.0 ? std::vector<int>{2} : std::vector<int>{4, 8});
    std::vector<Verdict> vs;
    for (int s : orders) vs.push_back(verify_mlsi_sweep(p, s, nu));
    suites["mlsi"] = verdict_list(vs);
    verdicts.insert(verdicts.end(), vs.begin(), vs.end());
  }
  if (all || which == "moments") {
    const Vec center = init_center_of(cfg);
    const GridDensity nu = normalize(p, oracle_grid(p, cells, center.cwiseAbs().maxCoeff() + 6.0));
    LmcConfig lc;
    lc.eta = cfg.eta_override ? *cfg.eta_override : p.params.eta_cap();
    lc.allow_above_cap = lc.eta > p.params.eta_cap();
    lc.n_steps = cfg.moment_steps;
    lc.n_chains = cfg.n_chains;
    lc.seed = cfg.seed;
    lc.record_steps = default_records(lc.n_steps, 20);
    const TrajectoryEnsemble ens = run_ensemble(p, lc, init_gaussian(center, lc.n_chains, lc.seed));
    std::vector<Verdict> vs;
    for (int s : cfg.moment_orders) vs.push_back(verify_moment_growth(ens, p, s, target_moment(nu, s)).verdict);
    suites["moments"] = verdict_list(vs);
    verdicts.insert(verdicts.end(), vs.begin(), vs.end());
  }
  if (all || which == "metrics") {
    const GridDensity nu = normalize(p, oracle_grid(p, cells, 12.0));
    const double fixtures[][2] = {{0.1, 1.0}, {1.0, 1.0}, {-2.0, 0.5}, {0.0, 4.0}, {0.5, 0.8}};
    std::vector<Verdict> vs;
    const int d = p.dim;
    for (const auto& fx : fixtures) {
      const double m = fx[0];
      const double v = fx[1];
      const GridDensity rho = tabulate(nu.grid, [m, v, d](std::span<const double> x) {
        double q = 0.0;
        for (int k = 0; k < d; ++k) q += (x[k] - m) * (x[k] - m);
        return -0.5 * q / v;
      });
      for (auto verdict : verify_metric_translations(rho, nu, p, 1.0 / cfg.kl_understatement)) {
        verdict.details["fixture"] = {{"mean", m}, {"variance", v}};
        vs.push_back(verdict);
      }
    }
    suites["metrics"] = verdict_list(vs);
    verdicts.insert(verdicts.end(), vs.begin(), vs.end());
  }

  print_verdicts(verdicts, out);
  const json report = {{"artifact_version", kArtifactVersion},
                       {"config_hash", content_hash(cfg)},
                       {"potential", {{"name", p.name}, {"dim", p.dim}, {"params", params_json(p.params)}}},
                       {"suites", suites},
                       {"summary", summary_of(verdicts)}};
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / "verify.json", report);
  return status_exit(combine(verdicts));
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "divergence at step " << e.step() << ": " << e.what() << '\n';
    return exit_code::divergence;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return exit_code::verification;
  } catch (const GridTooSmall& e) {
    err << "grid too small: " << e.what() << '\n';
    return exit_code::verification;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const fs::filesystem_error& e) {
    err << "filesystem error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_code::verification;
  }
}

}  // namespace lmc
