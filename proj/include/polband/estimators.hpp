#pragma once

// AIPW one-step value estimates, influence values, the plug-in optimal
// policy, and the Wald-type one-step and split-sample intervals.

#include <cstdint>
#include <span>
#include <vector>

#include "polband/model.hpp"
#include "polband/nuisance.hpp"
#include "polband/parallel.hpp"

namespace polband {

/// SD floor applied to degenerate (zero-variance) policies.
inline constexpr double kSdFloor = 1e-8;

/// Standard normal quantile.
double normal_quantile(double p);

/// Influence values 1{a=pi}/p(a|x) (y - m(a,x)) + m(pi(x),x) - center for a
/// decision vector aligned with `data`.
std::vector<double> influence_values(std::span<const std::uint8_t> decisions,
                                     const NuisanceTable& nuisance, const Dataset& data,
                                     Outcome outcome, double value_center);
std::vector<double> influence_values(const Policy& policy, const NuisanceFit& nuisance,
                                     const Dataset& data, Outcome outcome, double value_center);

struct ValueEstimate {
  double estimate = 0.0;
  double sd = 0.0;  // denominator n
  bool degenerate = false;
};

ValueEstimate value_estimate(std::span<const std::uint8_t> decisions,
                             const NuisanceTable& nuisance, const Dataset& data,
                             Outcome outcome);
ValueEstimate value_estimate(const Policy& policy, const NuisanceFit& nuisance,
                             const Dataset& data, Outcome outcome);

/// Estimates for every column of an n x K row-major decision matrix.
PolicyEstimates estimate_decisions(std::span<const std::uint8_t> decisions, std::size_t K,
                                   const NuisanceTable& nuisance, const Dataset& data,
                                   Backend backend = Backend::parallel);

/// Decision matrix (n x K, row-major) of every grid policy on the data.
std::vector<std::uint8_t> decision_matrix(const PolicyGrid& grid, const Features& xs);

PolicyEstimates estimate_all(const PolicyGrid& grid, const NuisanceFit& nuisance,
                             const Dataset& data, Backend backend = Backend::parallel);

/// Explicit policy 1{q_b(x) > 0} on the rows of `xs`, using the fit's
/// pointwise CATE.
Policy plugin_policy(const NuisanceFit& nuisance, const Features& xs);
/// Same rule on the fitted sample, using each observation's own (out-of-fold
/// when cross-fitted) nuisance evaluation.
Policy plugin_policy(const NuisanceFit& nuisance);

Interval wald_interval(double estimate, double sd, std::size_t n, double alpha, Method method);

struct OneStepResult {
  double psi_os = 0.0;
  double sigma_n = 0.0;
  Policy policy = Policy::explicit_labels({});
  Interval interval;
  bool degenerate = false;
};

struct OneStepOptions {
  bool cross_fit = true;
  int folds = 2;
};

OneStepResult one_step_ci(const Dataset& data, double alpha, const NuisanceRecipe& recipe,
                          OneStepOptions options, std::uint64_t seed);

/// Plug-in policy from one random half, Wald interval from the other.
OneStepResult os_split_ci(const Dataset& data, double alpha, const NuisanceRecipe& recipe,
                          std::uint64_t seed);

}  // namespace polband
