#include "polband/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "polband/kernels.hpp"

namespace polband {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), p);
}

namespace {

// Per-observation pieces of the AIPW pseudo-outcome: the value when the
// policy matches the observed action and the value when it does not.
struct AipwTerms {
  std::vector<double> match;
  std::vector<double> mismatch;
};

AipwTerms aipw_terms(const NuisanceTable& nuisance, const Dataset& data, Outcome outcome) {
  const std::size_t n = data.size();
  if (nuisance.size() != n) throw Error("nuisance table does not match the data size");
  auto y = data.outcome(outcome);
  AipwTerms t{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int a = data.actions()[i];
    const double p = nuisance.propensity(a, i);
    const double m_obs = nuisance.reg(outcome, a, i);
    const double m_other = nuisance.reg(outcome, 1 - a, i);
    if (!std::isfinite(p) || !std::isfinite(m_obs) || !std::isfinite(m_other) || !(p > 0.0)) {
      throw Error("non-finite or zero nuisance evaluation at observation " + std::to_string(i));
    }
    t.match[i] = (y[i] - m_obs) / p + m_obs;
    t.mismatch[i] = m_other;
  }
  return t;
}

}  // namespace

std::vector<double> influence_values(std::span<const std::uint8_t> decisions,
                                     const NuisanceTable& nuisance, const Dataset& data,
                                     Outcome outcome, double value_center) {
  if (decisions.size() != data.size()) throw Error("decision vector does not match the data");
  AipwTerms t = aipw_terms(nuisance, data, outcome);
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (decisions[i] == data.actions()[i] ? t.match[i] : t.mismatch[i]) - value_center;
  }
  return out;
}

std::vector<double> influence_values(const Policy& policy, const NuisanceFit& nuisance,
                                     const Dataset& data, Outcome outcome, double value_center) {
  return influence_values(evaluate_policy(policy, data.features()), nuisance.table(), data,
                          outcome, value_center);
}

ValueEstimate value_estimate(std::span<const std::uint8_t> decisions,
                             const NuisanceTable& nuisance, const Dataset& data,
                             Outcome outcome) {
  if (decisions.size() != data.size()) throw Error("decision vector does not match the data");
  AipwTerms t = aipw_terms(nuisance, data, outcome);
  double mean = 0.0, sd = 0.0;
  std::vector<double> centered(data.size());
  kernels::aipw_columns(decisions, data.actions(), t.match, t.mismatch, 1, {&mean, 1}, {&sd, 1},
                        centered, Backend::serial);
  return {mean, sd, sd < kSdFloor};
}

ValueEstimate value_estimate(const Policy& policy, const NuisanceFit& nuisance,
                             const Dataset& data, Outcome outcome) {
  return value_estimate(evaluate_policy(policy, data.features()), nuisance.table(), data,
                        outcome);
}

std::vector<std::uint8_t> decision_matrix(const PolicyGrid& grid, const Features& xs) {
  const std::size_t n = xs.size(), K = grid.size();
  std::vector<std::uint8_t> out(n * K);
  for (std::size_t k = 0; k < K; ++k) {
    if (grid[k].is_explicit()) {
      auto labels = evaluate_policy(grid[k], xs);
      for (std::size_t i = 0; i < n; ++i) out[i * K + k] = labels[i];
    }
  }
  if (std::holds_alternative<BoxRule>(grid[0].rule()) && xs.dim() < 3) {
    throw Error("box policies need 3-dimensional features");
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    auto x = xs.row(i);
    for (std::size_t k = 0; k < K; ++k) {
      if (!grid[k].is_explicit()) out[i * K + k] = static_cast<std::uint8_t>(grid[k].decide(x));
    }
  }
  return out;
}

PolicyEstimates estimate_decisions(std::span<const std::uint8_t> decisions, std::size_t K,
                                   const NuisanceTable& nuisance, const Dataset& data,
                                   Backend backend) {
  const std::size_t n = data.size();
  if (K == 0) throw Error("cannot estimate an empty policy set");
  if (decisions.size() != n * K) throw Error("decision matrix has the wrong shape");
  PolicyEstimates est;
  est.n = n;
  est.K = K;
  est.omega_hat.resize(K);
  est.psi_hat.resize(K);
  est.sigma_hat.resize(K);
  est.kappa_hat.resize(K);
  est.degenerate.assign(K, 0);
  est.influence_primary.resize(n * K);
  est.influence_subsidiary.resize(n * K);

  struct Target {
    Outcome outcome;
    std::vector<double>* value;
    std::vector<double>* sd;
    std::vector<double>* influence;
  };
  for (const Target& tg :
       {Target{Outcome::primary, &est.omega_hat, &est.sigma_hat, &est.influence_primary},
        Target{Outcome::subsidiary, &est.psi_hat, &est.kappa_hat, &est.influence_subsidiary}}) {
    AipwTerms t = aipw_terms(nuisance, data, tg.outcome);
    kernels::aipw_columns(decisions, data.actions(), t.match, t.mismatch, K, *tg.value, *tg.sd,
                          *tg.influence, backend);
    for (std::size_t k = 0; k < K; ++k) {
      if ((*tg.sd)[k] < kSdFloor) {
        (*tg.sd)[k] = kSdFloor;
        est.degenerate[k] = 1;
      }
    }
    std::vector<double> inv(K);
    for (std::size_t k = 0; k < K; ++k) inv[k] = 1.0 / (*tg.sd)[k];
    double* infl = tg.influence->data();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) infl[i * K + k] *= inv[k];
    }
  }
  return est;
}

PolicyEstimates estimate_all(const PolicyGrid& grid, const NuisanceFit& nuisance,
                             const Dataset& data, Backend backend) {
  auto decisions = decision_matrix(grid, data.features());
  return estimate_decisions(decisions, grid.size(), nuisance.table(), data, backend);
}

Policy plugin_policy(const NuisanceFit& nuisance, const Features& xs) {
  std::vector<std::uint8_t> labels(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    labels[i] = nuisance.cate_primary(xs.row(i)) > 0.0 ? 1 : 0;
  }
  return Policy::explicit_labels(std::move(labels));
}

Policy plugin_policy(const NuisanceFit& nuisance) {
  const auto& t = nuisance.table();
  std::vector<std::uint8_t> labels(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    labels[i] = t.cate(Outcome::primary, i) > 0.0 ? 1 : 0;
  }
  return Policy::explicit_labels(std::move(labels));
}

Interval wald_interval(double estimate, double sd, std::size_t n, double alpha, Method method) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  const double half = normal_quantile(1.0 - alpha / 2.0) * sd / std::sqrt(static_cast<double>(n));
  return {estimate - half, estimate + half, method};
}

OneStepResult one_step_ci(const Dataset& data, double alpha, const NuisanceRecipe& recipe,
                          OneStepOptions options, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  NuisanceFit fit = options.cross_fit ? cross_fit(data, options.folds, recipe, seed)
                                      : fit_nuisance(data, recipe);
  Policy pi_hat = plugin_policy(fit);
  const auto& labels = std::get<ExplicitRule>(pi_hat.rule()).labels;
  ValueEstimate ve = value_estimate(labels, fit.table(), data, Outcome::subsidiary);
  OneStepResult r;
  r.psi_os = ve.estimate;
  r.sigma_n = ve.sd;
  r.degenerate = ve.degenerate;
  r.interval = wald_interval(ve.estimate, ve.sd, data.size(), alpha, Method::one_step);
  r.policy = std::move(pi_hat);
  return r;
}

OneStepResult os_split_ci(const Dataset& data, double alpha, const NuisanceRecipe& recipe,
                          std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n < 4) throw Error("os-split needs at least 4 observations");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = n / 2;
  std::vector<std::size_t> first(order.begin(), order.begin() + half);
  std::vector<std::size_t> second(order.begin() + half, order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());

  Dataset learn = data.subset(first);
  Dataset evaluate = data.subset(second);
  NuisanceFit policy_fit = fit_nuisance(learn, recipe);
  Policy pi_hat = plugin_policy(policy_fit, evaluate.features());
  NuisanceFit value_fit = fit_nuisance(evaluate, recipe);
  const auto& labels = std::get<ExplicitRule>(pi_hat.rule()).labels;
  ValueEstimate ve = value_estimate(labels, value_fit.table(), evaluate, Outcome::subsidiary);

  OneStepResult r;
  r.psi_os = ve.estimate;
  r.sigma_n = ve.sd;
  r.degenerate = ve.degenerate;
  r.interval = wald_interval(ve.estimate, ve.sd, evaluate.size(), alpha, Method::os_split);
  r.policy = std::move(pi_hat);
  return r;
}

}  // namespace polband
