#pragma once

// Multiplier bootstrap quantiles, first-stage policy filtration, and the
// union-bounding and joint two-stage intervals for [psi_l, psi_u].

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "polband/model.hpp"
#include "polband/parallel.hpp"

namespace polband {

enum class Process { f, ftilde };

/// B x K bootstrap realizations (row-major) of the standardized primary (f)
/// and subsidiary (ftilde) processes.
struct BootstrapDraws {
  std::size_t B = 0;
  std::size_t K = 0;
  std::vector<double> f;
  std::vector<double> ftilde;
  bool normalized = false;

  const std::vector<double>& of(Process p) const { return p == Process::f ? f : ftilde; }
  double at(Process p, std::size_t j, std::size_t k) const { return of(p)[j * K + k]; }
};

/// Gaussian multipliers shared by every policy and both processes within a
/// replicate; row j comes from substream (seed, j). Columns are studentized
/// afterwards when `normalize` is set.
BootstrapDraws multiplier_bootstrap(const PolicyEstimates& estimates, int B, std::uint64_t seed,
                                    Backend backend = Backend::parallel, bool normalize = true);

/// Type-7 (linear interpolation) sample quantile.
double quantile_type7(std::vector<double> values, double level);

/// `level`-quantile over replicates of the row maximum.
double sup_quantile(const BootstrapDraws& draws, Process which, double level);

/// Standard normal quantile at 1 - (alpha - beta) / 2.
double z_alpha_beta(double alpha, double beta);

struct LowerBoundRule {
  enum class Kind { sup_lcb, external };
  Kind kind = Kind::sup_lcb;
  double value = 0.0;

  static LowerBoundRule sup_lcb() { return {}; }
  static LowerBoundRule external(double L) { return {Kind::external, L}; }
};

struct FilteredSet {
  std::vector<std::size_t> kept;
  double L_n = 0.0;
  double cutoff_used = 0.0;
};

/// Keeps k with L_n <= omega_k + sigma_k * t_upper / sqrt(n), where the
/// default L_n is max_k [omega_k - sigma_k * s_lower / sqrt(n)].
FilteredSet filter_policies(const PolicyEstimates& est, std::size_t n, double s_lower,
                            double t_upper, LowerBoundRule rule = LowerBoundRule::sup_lcb());

FilteredSet first_stage_set(const PolicyEstimates& est, std::size_t n, double t_beta,
                            LowerBoundRule rule = LowerBoundRule::sup_lcb());

/// [min_k psi_k - kappa_k u / sqrt(n), max_k psi_k + kappa_k u / sqrt(n)] over `kept`.
Interval interval_over(const PolicyEstimates& est, std::span<const std::size_t> kept,
                       std::size_t n, double u, Method method);

Interval union_ci(const PolicyEstimates& est, const FilteredSet& filtered, std::size_t n,
                  double alpha, double beta);

struct JointCutoffs {
  double s = 0.0;
  double t = 0.0;
  double u = 0.0;
};

/// Feasible (t, u) pairs with s = t: u(t) is the smallest u such that for
/// every policy the empirical probability of
/// {max f <= t, min f >= -t, |ftilde_k| <= u} is at least 1 - alpha.
struct JointFrontier {
  std::vector<JointCutoffs> points;  // increasing t, nonincreasing u
};

/// Candidate t values: `t_grid_size` points evenly spaced between the 50% and
/// 99.9% quantiles of the sup draws, plus `extra_t`.
JointFrontier joint_frontier(const BootstrapDraws& draws, double alpha, int t_grid_size,
                             std::span<const double> extra_t = {},
                             Backend backend = Backend::parallel);

/// Smallest feasible u on the frontier (smallest t among ties).
JointCutoffs joint_cutoffs(const BootstrapDraws& draws, double alpha, int t_grid_size);
JointCutoffs min_u_cutoffs(const JointFrontier& frontier);

Interval joint_ci(const PolicyEstimates& est, std::size_t n, const JointCutoffs& cutoffs);

struct JointResult {
  JointCutoffs cutoffs;
  FilteredSet kept;
  Interval interval;
};

/// Narrowest interval over the frontier and the optional extra candidates.
JointResult optimized_joint_ci(const PolicyEstimates& est, std::size_t n,
                               const JointFrontier& frontier,
                               std::span<const JointCutoffs> extra = {});

struct BandConfig {
  int B = 1000;
  double alpha = 0.05;
  double beta = 0.01;
  int t_grid = 50;
  std::uint64_t seed = 0;
};

struct BandResult {
  std::size_t K = 0;
  Cutoffs cutoffs;
  FilteredSet union_set;
  FilteredSet joint_set;
  Interval union_interval;
  Interval joint_interval;
};

/// Both two-stage intervals from one set of shared draws. The union triple
/// (t_beta, t_beta, z_{alpha,beta}) satisfies the joint constraint by the
/// union bound, so it is always a joint candidate.
BandResult compute_bands(const PolicyEstimates& est, const BandConfig& config,
                         Backend backend = Backend::parallel);
BandResult compute_bands(const PolicyEstimates& est, const BootstrapDraws& draws,
                         const BandConfig& config, Backend backend = Backend::parallel);

nlohmann::json to_json(const BandResult& r);

enum class ClassKind { threshold, box };

struct ClassBounds {
  double lo = -1.0;
  double hi = 1.0;
  int grid_points = 2000;  // threshold class only
};

/// Maximizes `objective` over the class. Threshold: exhaustive over the
/// evenly spaced grid. Box: seeded multi-start random search followed by
/// coordinate descent; `budget` caps the number of objective evaluations.
Policy optimize_over_class(const std::function<double(const Policy&)>& objective,
                           ClassKind kind, ClassBounds bounds, int budget, std::uint64_t seed);

}  // namespace polband
