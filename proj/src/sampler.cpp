#include "lmclab/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "lmclab/errors.hpp"
#include "lmclab/rng.hpp"

namespace lmc {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

void lmc_step(std::span<const double> x, std::span<const double> grad, double eta, std::span<const double> noise,
              std::span<double> out, std::int64_t step) {
  const double scale = std::sqrt(2.0 * eta);
  bool ok = true;
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - eta * grad[i] + scale * noise[i];
    ok = ok && std::isfinite(out[i]);
  }
  if (!ok) throw DivergenceError(step, "non-finite LMC state at step " + std::to_string(step));
}

Vec lmc_step(const Vec& x, const Vec& grad, double eta, const Vec& noise, std::int64_t step) {
  if (grad.size() != x.size() || noise.size() != x.size()) throw ConfigError("lmc_step: size mismatch");
  Vec out(x.size());
  lmc_step({x.data(), static_cast<size_t>(x.size())}, {grad.data(), static_cast<size_t>(grad.size())}, eta,
           {noise.data(), static_cast<size_t>(noise.size())}, {out.data(), static_cast<size_t>(out.size())}, step);
  return out;
}

Samples init_gaussian(const Vec& center, std::int64_t n_chains, std::uint64_t seed) {
  if (n_chains < 1) throw ConfigError("n_chains must be >= 1");
  const int d = static_cast<int>(center.size());
  const NoiseStream noise(seed);
  Samples out(n_chains, d);
  for (std::int64_t i = 0; i < n_chains; ++i) {
    double* row = out.row(i).data();
    noise.fill(static_cast<std::uint64_t>(i), -1, d, row);
    for (int j = 0; j < d; ++j) row[j] += center[j];
  }
  return out;
}

std::vector<std::int64_t> normalized_record_steps(const LmcConfig& cfg) {
  std::vector<std::int64_t> steps = cfg.record_steps;
  steps.push_back(0);
  steps.push_back(cfg.n_steps);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  if (steps.front() < 0 || steps.back() > cfg.n_steps) throw ConfigError("record steps must lie in [0, n_steps]");
  return steps;
}

int worker_count() {
  int n = 0;
  if (const char* env = std::getenv("LMC_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw ConfigError("LMC_LAB_THREADS must be a nonnegative integer");
    n = static_cast<int>(std::min<long>(v, 1024));
  }
  if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

namespace {

struct Divergence {
  std::int64_t step = std::numeric_limits<std::int64_t>::max();
  std::int64_t chain = -1;
};

// Runs chains [lo, hi) and writes their rows into every snapshot.
Divergence run_block(const PotentialSpec& p, const LmcConfig& cfg, const std::vector<std::int64_t>& records,
                     const Samples& init, std::vector<Samples*>& snaps, std::int64_t lo, std::int64_t hi) {
  const int d = p.dim;
  const NoiseStream noise(cfg.seed);
  std::vector<double> x(d), g(d), z(d), next(d);
  Divergence first;
  const double eta = cfg.eta;

  for (std::int64_t c = lo; c < hi; ++c) {
    std::copy_n(init.row(c).data(), d, x.data());
    std::copy_n(x.data(), d, snaps[0]->row(c).data());
    std::int64_t k = 0;
    try {
      if (cfg.propagation == Propagation::exact_quadratic) {
        const double curv = *p.isotropic_curvature;
        const double log_rho = std::log1p(-curv * eta);
        for (size_t r = 1; r < records.size(); ++r) {
          const std::int64_t n = records[r] - records[r - 1];
          const double contraction = std::exp(static_cast<double>(n) * log_rho);
          // Variance 2 eta sum_{j<n} rho^(2j) of the accumulated noise.
          const double var = curv * eta == 0.0
                                 ? 2.0 * eta * static_cast<double>(n)
                                 : 2.0 * eta * -std::expm1(2.0 * static_cast<double>(n) * log_rho) /
                                       (curv * eta * (2.0 - curv * eta));
          const double sd = std::sqrt(var);
          k = records[r];
          noise.fill(static_cast<std::uint64_t>(c), records[r] - 1, d, z);
          for (int j = 0; j < d; ++j) {
            x[j] = contraction * x[j] + sd * z[j];
            if (!std::isfinite(x[j])) throw DivergenceError(k, "non-finite LMC state");
          }
          std::copy_n(x.data(), d, snaps[r]->row(c).data());
        }
      } else {
        size_t r = 1;
        for (k = 0; k < cfg.n_steps; ++k) {
          p.eval_grad(x, g);
          noise.fill(static_cast<std::uint64_t>(c), k, d, z);
          lmc_step(x, g, eta, z, next, k + 1);
          std::swap(x, next);
          while (r < records.size() && records[r] == k + 1) {
            std::copy_n(x.data(), d, snaps[r]->row(c).data());
            ++r;
          }
        }
      }
    } catch (const DivergenceError& e) {
      if (e.step() < first.step) first = {e.step(), c};
    }
  }
  return first;
}

}  // namespace

TrajectoryEnsemble run_ensemble(const PotentialSpec& p, const LmcConfig& cfg, const Samples& init) {
  if (init.rows() != cfg.n_chains || init.cols() != p.dim) {
    std::ostringstream os;
    os << "init has shape " << init.rows() << "x" << init.cols() << ", expected " << cfg.n_chains << "x" << p.dim;
    throw ConfigError(os.str());
  }
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("eta must be finite and nonnegative");
  if (cfg.n_steps < 0) throw ConfigError("n_steps must be nonnegative");
  if (cfg.eta > p.params.eta_cap() && !cfg.allow_above_cap) {
    std::ostringstream os;
    os << "eta = " << cfg.eta << " exceeds the moment-stability cap " << p.params.eta_cap();
    throw ConfigError(os.str());
  }
  if (cfg.propagation == Propagation::exact_quadratic && !p.isotropic_curvature) {
    throw ConfigError("exact propagation needs a potential with grad f(x) = c x");
  }
  for (Eigen::Index i = 0; i < init.size(); ++i) {
    if (!std::isfinite(init.data()[i])) throw ConfigError("init contains non-finite values");
  }

  TrajectoryEnsemble ens;
  ens.config = cfg;
  ens.config.record_steps = normalized_record_steps(cfg);
  ens.potential_name = p.name;
  ens.dim = p.dim;
  const auto& records = ens.config.record_steps;
  std::vector<Samples*> snaps;
  for (std::int64_t s : records) {
    auto& m = ens.snapshots[s];
    m.resize(cfg.n_chains, p.dim);
  }
  for (std::int64_t s : records) snaps.push_back(&ens.snapshots[s]);

  const int workers = static_cast<int>(std::min<std::int64_t>(worker_count(), cfg.n_chains));
  std::vector<Divergence> found(static_cast<size_t>(workers));
  auto bounds = [&](int w) { return cfg.n_chains * w / workers; };
  if (workers == 1) {
    found[0] = run_block(p, cfg, records, init, snaps, 0, cfg.n_chains);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          found[static_cast<size_t>(w)] = run_block(p, cfg, records, init, snaps, bounds(w), bounds(w + 1));
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  Divergence first;
  for (const auto& f : found) {
    if (f.step < first.step || (f.step == first.step && f.chain < first.chain)) first = f;
  }
  if (first.chain >= 0) {
    throw DivergenceError(first.step, "chain " + std::to_string(first.chain) + " diverged at step " +
                                          std::to_string(first.step));
  }
  return ens;
}

void write_snapshots_csv(const TrajectoryEnsemble& ens, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "step,chain";
  for (int j = 1; j <= ens.dim; ++j) out << ",x_" << j;
  out << '\n' << std::setprecision(17);
  for (const auto& [step, m] : ens.snapshots) {
    for (Eigen::Index c = 0; c < m.rows(); ++c) {
      out << step << ',' << c;
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(c, j);
      out << '\n';
    }
  }
}

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated snapshot file");
  return v;
}

}  // namespace

void write_snapshots_binary(const TrajectoryEnsemble& ens, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out.write("LMCE", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ens.dim));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ens.config.n_chains));
  put<std::uint64_t>(out, ens.snapshots.size());
  for (const auto& kv : ens.snapshots) put<std::uint64_t>(out, static_cast<std::uint64_t>(kv.first));
  for (const auto& kv : ens.snapshots) {
    out.write(reinterpret_cast<const char*>(kv.second.data()),
              static_cast<std::streamsize>(kv.second.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("failed writing " + path);
}

TrajectoryEnsemble read_snapshots_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LMCE", 4) != 0) throw DataError(path + " is not a snapshot file");
  if (get<std::uint32_t>(in) != 1) throw DataError("unsupported snapshot version");
  TrajectoryEnsemble ens;
  ens.dim = static_cast<int>(get<std::uint64_t>(in));
  ens.config.n_chains = static_cast<std::int64_t>(get<std::uint64_t>(in));
  const auto n = get<std::uint64_t>(in);
  std::vector<std::int64_t> steps;
  for (std::uint64_t i = 0; i < n; ++i) steps.push_back(static_cast<std::int64_t>(get<std::uint64_t>(in)));
  for (std::int64_t s : steps) {
    Samples m(ens.config.n_chains, ens.dim);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw DataError("truncated snapshot file");
    ens.snapshots.emplace(s, std::move(m));
  }
  ens.config.record_steps = steps;
  if (!steps.empty()) ens.config.n_steps = steps.back();
  return ens;
}

}  // namespace lmc
