#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lmclab/potential.hpp"

namespace lmc {

/// Regular 1D or 2D grid. Cells are indexed row-major: flat = i0 * n1 + i1.
struct GridSpec {
  int dim = 1;
  std::array<double, 2> lo{-10.0, -10.0};
  std::array<double, 2> hi{10.0, 10.0};
  std::array<int, 2> n_cells{256, 256};

  static GridSpec line(double lo, double hi, int n);
  static GridSpec square(double lo, double hi, int n);

  // Throws GridError unless dim is 1 or 2, bounds are ordered and n_cells >= 256.
  void validate() const;
  std::int64_t size() const;
  double width(int axis) const;
  double cell_volume() const;
  double center(int axis, std::int64_t i) const;
  // Cell-center coordinates of cell `flat`, written into out[0..dim).
  void point(std::int64_t flat, double* out) const;
  // Cell containing x, or -1 when x lies outside the box.
  std::int64_t locate(const double* x) const;

  bool operator==(const GridSpec& o) const;
};

/// Upper bound on the target mass outside a box, from the ray estimate
/// f(r u) >= f(R u) + kappa (r - R) valid for r >= R.
struct TailBound {
  int dim = 1;
  double R = 0.0;
  double kappa = 0.0;
  double log_boundary_weight = 0.0;  // log of sum (1D) or max (2D) of e^(-f - log Z) on the sphere of radius R

  double mass() const;
  // Bound on the integral of (1 + |x|^2)^(s/2) outside the box.
  double moment(double s) const;
};

struct GridDensity {
  GridSpec grid;
  std::vector<double> log_density;  // per cell center, normalized on the grid
  double log_Z = 0.0;
  std::optional<TailBound> tail;

  double density(std::int64_t i) const;
};

// Tabulates e^(-f) / Z. Throws GridTooSmall when the mass outside the box
// may exceed 1e-10 relative to Z.
GridDensity normalize(const PotentialSpec& p, const GridSpec& g);

// Tabulates an arbitrary unnormalized log density and normalizes it on the grid.
GridDensity tabulate(const GridSpec& g, const ScalarField& log_density);

// Smallest symmetric box whose tail mass is below `tail` (relative to Z),
// also capped by the radius implied by the dissipative lower bound on f.
GridSpec auto_grid(const PotentialSpec& p, int n_cells, double tail = 1e-12);

// Integral of (1 + |x|^2)^(s/2) against the density.
double target_moment(const GridDensity& nu, double s);

struct KlFisher {
  double kl;
  double fisher;
};

// KL(rho || nu) and relative Fisher information with analytic gradients of
// log rho and of f (nu proportional to e^-f).
KlFisher kl_and_fisher(const GridDensity& rho, const VectorField& grad_log_rho, const GridDensity& nu,
                       const VectorField& grad_f);
double kl_divergence(const GridDensity& rho, const GridDensity& nu);
double tv_distance(const GridDensity& rho, const GridDensity& nu);
// Exact for piecewise-constant densities: quantile functions are piecewise linear.
double wasserstein_alpha_1d(const GridDensity& rho, const GridDensity& nu, double alpha);

// KL / (lambda I^(1-delta) M_s(rho + nu)^delta) with the mLSI constants of p at order s.
double mlsi_ratio(const GridDensity& rho, const VectorField& grad_log_rho, const PotentialSpec& p,
                  const GridDensity& nu, int s);

void write_density_csv(const GridDensity& g, const std::string& path);

}  // namespace lmc
