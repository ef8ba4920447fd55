#pragma once

// Nuisance estimation: propensity p(a|x), outcome regressions for both
// outcomes, their CATEs, and cross-fitting.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "polband/model.hpp"

namespace polband {

/// Bandwidth choice: Silverman's rule per arm (`automatic`) or a fixed value
/// shared by every dimension.
struct Bandwidth {
  bool automatic = true;
  double value = 0.0;

  static Bandwidth silverman() { return {}; }
  static Bandwidth fixed(double h) { return {false, h}; }
};

/// Silverman's rule of thumb for a Gaussian product kernel, one entry per
/// dimension: sd_k * (4 / ((d + 2) n))^(1 / (d + 4)).
std::vector<double> silverman_bandwidth(const Features& x);

/// Nadaraya-Watson smoother with a Gaussian product kernel. Holds several
/// response columns so one kernel weight pass serves all of them.
class KernelSmoother {
 public:
  KernelSmoother(Features x, std::vector<std::vector<double>> responses,
                 std::vector<double> bandwidth);

  /// Weighted mean of every response column at `x`, written to `out`.
  void predict(std::span<const double> x, std::span<double> out) const;
  double predict(std::span<const double> x, std::size_t column = 0) const;

  std::size_t size() const { return x_.size(); }
  std::size_t columns() const { return responses_.size(); }
  const std::vector<double>& bandwidth() const { return bandwidth_; }

 private:
  Features x_;
  std::vector<double> scaled_x_;  // x / h, row-major
  std::vector<std::vector<double>> responses_;
  std::vector<double> bandwidth_;
  std::vector<double> inv_h_;
};

/// (a, x) -> E[Y | A = a, X = x] for one outcome.
class RegressionFunction {
 public:
  RegressionFunction(KernelSmoother control, KernelSmoother treated)
      : arms_{std::move(control), std::move(treated)} {}

  double operator()(int a, std::span<const double> x) const { return arms_[a].predict(x); }
  const KernelSmoother& arm(int a) const { return arms_[a]; }

 private:
  std::array<KernelSmoother, 2> arms_;
};

RegressionFunction fit_kernel_regression(const Dataset& data, Outcome outcome,
                                         Bandwidth bandwidth = Bandwidth::silverman());

struct PropensityMethod {
  enum class Kind { known, kernel };
  Kind kind = Kind::kernel;
  std::function<double(std::span<const double>)> p1;  // P(A=1 | x) when known

  static PropensityMethod kernel() { return {}; }
  static PropensityMethod known(std::function<double(std::span<const double>)> p1) {
    return {Kind::known, std::move(p1)};
  }
};

/// Clipped propensity score p(a | x).
class PropensityFunction {
 public:
  PropensityFunction(std::function<double(std::span<const double>)> p1, double clip);
  PropensityFunction(KernelSmoother smoother, double clip);

  double treated(std::span<const double> x) const;
  double operator()(int a, std::span<const double> x) const {
    double p = treated(x);
    return a == 1 ? p : 1.0 - p;
  }
  double clip() const { return clip_; }

 private:
  std::function<double(std::span<const double>)> known_;
  std::optional<KernelSmoother> smoother_;
  double clip_;
};

PropensityFunction fit_propensity(const Dataset& data, const PropensityMethod& method,
                                  double clip = 0.01,
                                  Bandwidth bandwidth = Bandwidth::silverman());

struct NuisanceRecipe {
  Bandwidth bandwidth = Bandwidth::silverman();
  PropensityMethod propensity = PropensityMethod::kernel();
  double clip = 0.01;
};

/// Nuisance values at one point.
struct NuisanceValues {
  double p1 = 0.5;
  std::array<double, 2> primary{};     // m*(0,x), m*(1,x)
  std::array<double, 2> subsidiary{};  // m†(0,x), m†(1,x)
};

/// Nuisances trained on a single training set.
class NuisanceModel {
 public:
  NuisanceModel(PropensityFunction propensity, KernelSmoother control, KernelSmoother treated);

  NuisanceValues evaluate(std::span<const double> x) const;
  const PropensityFunction& propensity() const { return propensity_; }
  const KernelSmoother& arm(int a) const { return arms_[a]; }

 private:
  PropensityFunction propensity_;
  std::array<KernelSmoother, 2> arms_;  // responses: {y_star, y_dag}
};

NuisanceModel fit_nuisance_model(const Dataset& data, const NuisanceRecipe& recipe);

/// Per-observation nuisance evaluations (out-of-fold under cross-fitting).
struct NuisanceTable {
  std::vector<double> p1;
  std::array<std::vector<double>, 2> primary;
  std::array<std::vector<double>, 2> subsidiary;

  std::size_t size() const { return p1.size(); }
  double propensity(int a, std::size_t i) const { return a == 1 ? p1[i] : 1.0 - p1[i]; }
  double reg(Outcome o, int a, std::size_t i) const {
    return o == Outcome::primary ? primary[a][i] : subsidiary[a][i];
  }
  double cate(Outcome o, std::size_t i) const { return reg(o, 1, i) - reg(o, 0, i); }
};

/// Fitted nuisances for a dataset.
///
/// Pointwise functions average the fold models when cross-fitted; the table
/// holds the evaluation each observation must use.
class NuisanceFit {
 public:
  NuisanceFit(std::vector<NuisanceModel> models, std::vector<int> folds, NuisanceTable table);

  double propensity(int a, std::span<const double> x) const;
  double reg_primary(int a, std::span<const double> x) const;
  double reg_subsidiary(int a, std::span<const double> x) const;
  double cate_primary(std::span<const double> x) const;
  double cate_subsidiary(std::span<const double> x) const;
  NuisanceValues evaluate(std::span<const double> x) const;

  const NuisanceTable& table() const { return table_; }
  std::optional<std::span<const int>> fold_assignment() const;
  std::size_t fold_count() const { return models_.size(); }
  const NuisanceModel& model(std::size_t fold) const { return models_[fold]; }

 private:
  std::vector<NuisanceModel> models_;
  std::vector<int> folds_;
  NuisanceTable table_;
};

/// Fit on the whole sample and evaluate in-sample.
NuisanceFit fit_nuisance(const Dataset& data, const NuisanceRecipe& recipe);

/// Seeded uniform partition into `folds` groups of near-equal size.
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

/// Observation i is scored by the model trained without its fold.
NuisanceFit cross_fit(const Dataset& data, int folds, const NuisanceRecipe& recipe,
                      std::uint64_t seed);
NuisanceFit cross_fit(const Dataset& data, std::span<const int> fold_of, int folds,
                      const NuisanceRecipe& recipe);

}  // namespace polband
