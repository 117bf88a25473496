#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmclab/potential.hpp"

namespace lmc {

/// Free parameters of a catalog entry. Numbers and string options are kept
/// apart so unknown or mistyped keys can be rejected.
struct Hyper {
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> options;

  double number(const std::string& key, double fallback) const;
  std::string option(const std::string& key, const std::string& fallback) const;
};

/// Regression data: one row of V per observation, Y the responses.
struct Dataset {
  Mat V;
  Vec Y;
};

// CSV with a header row; the last column is the response.
Dataset load_dataset_csv(const std::string& path);

// Deterministic synthetic data for the regression examples:
// "linear" draws Y = V x* + noise, "logistic" draws Bernoulli responses.
Dataset synthetic_dataset(std::string_view kind, int n, int d, std::uint64_t seed);

const std::vector<std::string>& catalog_names();

// Builds a catalog potential. Data-driven entries (bridge_regression,
// bayes_logistic, huberized_regression) require `data` with data->V.cols() == dim.
PotentialSpec catalog_get(std::string_view name, int dim, const Hyper& hyper = {},
                          const Dataset* data = nullptr);

// True when the entry's constants came from numerical scans rather than
// closed forms; audits then use the looser tolerance.
bool catalog_constants_fitted(std::string_view name);

/// Constants of the smoothed linear-tail comparator (1 + r^(1+tau))^(1/(1+tau)):
/// Hessian floor mu for theta = 2 + tau and sup distance xi to sqrt(1 + r^2).
struct SmoothedNormConstants {
  double tau;
  double theta;
  double mu;
  double xi;
};
SmoothedNormConstants smoothed_norm_constants(double tau);

double default_tau(int dim);

struct DissipativityFit {
  double a;
  double b;
};

// Fits <grad f(x), x> >= a |x|^alpha - b by scanning rays and a box:
// a is 0.9 times the smallest outer-radius slope, b the worst deficit plus 10%.
DissipativityFit fit_dissipativity(const PotentialSpec& p, double alpha, double outer_radius = 1e3,
                                   double box_half_width = 10.0);

}  // namespace lmc
