#include "polband/bands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "polband/estimators.hpp"
#include "polband/kernels.hpp"
#include "polband/rng.hpp"

namespace polband {

BootstrapDraws multiplier_bootstrap(const PolicyEstimates& est, int B, std::uint64_t seed,
                                    Backend backend, bool normalize) {
  if (B < 100) {
    throw Error("multiplier bootstrap needs B >= 100 replicates, got " + std::to_string(B));
  }
  const std::size_t n = est.n, K = est.K;
  if (n == 0 || K == 0 || est.influence_primary.size() != n * K ||
      est.influence_subsidiary.size() != n * K) {
    throw Error("influence matrices are not populated");
  }
  const auto Bs = static_cast<std::size_t>(B);
  std::vector<double> eps(Bs * n);
  auto fill_row = [&](std::size_t j) {
    auto rng = substream(seed, 0, StreamRole::bootstrap, j);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) eps[j * n + i] = normal(rng);
  };
  if (backend == Backend::serial) {
    for (std::size_t j = 0; j < Bs; ++j) fill_row(j);
  } else {
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < Bs; ++j) fill_row(j);
  }

  BootstrapDraws d;
  d.B = Bs;
  d.K = K;
  d.f.resize(Bs * K);
  d.ftilde.resize(Bs * K);
  kernels::multiplier_sums(eps, est.influence_primary, Bs, n, K, d.f, backend);
  kernels::multiplier_sums(eps, est.influence_subsidiary, Bs, n, K, d.ftilde, backend);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : d.f) v *= scale;
  for (double& v : d.ftilde) v *= scale;
  if (normalize) {
    kernels::studentize_columns(d.f, Bs, K, backend);
    kernels::studentize_columns(d.ftilde, Bs, K, backend);
    d.normalized = true;
  }
  return d;
}

double quantile_type7(std::vector<double> values, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("quantile level must lie in (0, 1)");
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double sup_quantile(const BootstrapDraws& draws, Process which, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("quantile level must lie in (0, 1)");
  if (!draws.normalized) throw Error("sup quantile requires normalized draws");
  std::vector<double> row_max(draws.B), row_min(draws.B);
  kernels::row_extrema(draws.of(which), draws.B, draws.K, row_max, row_min, Backend::serial);
  return quantile_type7(std::move(row_max), level);
}

double z_alpha_beta(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (!(beta > 0.0 && beta < alpha)) throw Error("beta must satisfy 0 < beta < alpha");
  return normal_quantile(1.0 - (alpha - beta) / 2.0);
}

FilteredSet filter_policies(const PolicyEstimates& est, std::size_t n, double s_lower,
                            double t_upper, LowerBoundRule rule) {
  if (!(s_lower >= 0.0) || !(t_upper >= 0.0)) throw Error("filtration cutoffs must be >= 0");
  const double root_n = std::sqrt(static_cast<double>(n));
  FilteredSet out;
  out.cutoff_used = t_upper;
  if (rule.kind == LowerBoundRule::Kind::external) {
    if (std::isnan(rule.value)) throw Error("external lower bound L_n is NaN");
    out.L_n = rule.value;
  } else {
    out.L_n = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < est.K; ++k) {
      out.L_n = std::max(out.L_n, est.omega_hat[k] - est.sigma_hat[k] * s_lower / root_n);
    }
  }
  for (std::size_t k = 0; k < est.K; ++k) {
    if (out.L_n <= est.omega_hat[k] + est.sigma_hat[k] * t_upper / root_n) out.kept.push_back(k);
  }
  return out;
}

FilteredSet first_stage_set(const PolicyEstimates& est, std::size_t n, double t_beta,
                            LowerBoundRule rule) {
  if (!(t_beta >= 0.0)) throw Error("t_beta must be >= 0");
  return filter_policies(est, n, t_beta, t_beta, rule);
}

Interval interval_over(const PolicyEstimates& est, std::span<const std::size_t> kept,
                       std::size_t n, double u, Method method) {
  if (kept.empty()) throw Error("cannot form an interval over an empty policy set");
  const double root_n = std::sqrt(static_cast<double>(n));
  Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
              method};
  for (std::size_t k : kept) {
    const double half = est.kappa_hat[k] * u / root_n;
    iv.lower = std::min(iv.lower, est.psi_hat[k] - half);
    iv.upper = std::max(iv.upper, est.psi_hat[k] + half);
  }
  return iv;
}

Interval union_ci(const PolicyEstimates& est, const FilteredSet& filtered, std::size_t n,
                  double alpha, double beta) {
  const double z = z_alpha_beta(alpha, beta);
  if (filtered.kept.empty()) throw Error("first-stage set is empty");
  return interval_over(est, filtered.kept, n, z, Method::union_bound);
}

JointFrontier joint_frontier(const BootstrapDraws& draws, double alpha, int t_grid_size,
                             std::span<const double> extra_t, Backend backend) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (t_grid_size < 1) throw Error("t grid needs at least one point");
  if (!draws.normalized) throw Error("joint cutoffs require normalized draws");
  const std::size_t B = draws.B, K = draws.K;

  std::vector<double> row_max(B), row_min(B);
  kernels::row_extrema(draws.f, B, K, row_max, row_min, backend);

  std::vector<double> ts;
  const double lo = quantile_type7(row_max, 0.5);
  const double hi = quantile_type7(row_max, 0.999);
  if (t_grid_size == 1) {
    ts.push_back(hi);
  } else {
    for (int g = 0; g < t_grid_size; ++g) ts.push_back(lo + (hi - lo) * g / (t_grid_size - 1));
  }
  for (double t : extra_t) ts.push_back(t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  // |ftilde| transposed to K x B so each policy's draws are contiguous.
  std::vector<double> abs_t(K * B);
  for (std::size_t j = 0; j < B; ++j)
    for (std::size_t k = 0; k < K; ++k) abs_t[k * B + j] = std::abs(draws.ftilde[j * K + k]);

  const auto need = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(B) - 1e-9));
  JointFrontier out;
  std::vector<std::size_t> rows;
  for (double t : ts) {
    if (t < 0.0) continue;
    rows.clear();
    for (std::size_t j = 0; j < B; ++j) {
      if (row_max[j] <= t && row_min[j] >= -t) rows.push_back(j);
    }
    if (rows.size() < need || need == 0) continue;
    double u = 0.0;
    auto policy_u = [&](std::size_t k, std::vector<double>& buf) {
      buf.clear();
      const double* col = abs_t.data() + k * B;
      for (std::size_t j : rows) buf.push_back(col[j]);
      std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(need - 1),
                       buf.end());
      return buf[need - 1];
    };
    if (backend == Backend::serial) {
      std::vector<double> buf;
      for (std::size_t k = 0; k < K; ++k) u = std::max(u, policy_u(k, buf));
    } else {
#pragma omp parallel
      {
        std::vector<double> buf;
        double local = 0.0;
#pragma omp for schedule(static) nowait
        for (std::size_t k = 0; k < K; ++k) local = std::max(local, policy_u(k, buf));
#pragma omp critical(polband_joint_u)
        u = std::max(u, local);
      }
    }
    out.points.push_back({t, t, u});
  }
  return out;
}

JointCutoffs min_u_cutoffs(const JointFrontier& frontier) {
  if (frontier.points.empty()) {
    throw Error(
        "no feasible joint cutoff on the t grid; increase the bootstrap size B or the t grid");
  }
  JointCutoffs best = frontier.points.front();
  for (const auto& p : frontier.points) {
    if (p.u < best.u) best = p;
  }
  return best;
}

JointCutoffs joint_cutoffs(const BootstrapDraws& draws, double alpha, int t_grid_size) {
  return min_u_cutoffs(joint_frontier(draws, alpha, t_grid_size));
}

Interval joint_ci(const PolicyEstimates& est, std::size_t n, const JointCutoffs& c) {
  if (!(c.s >= 0.0 && c.t >= 0.0 && c.u >= 0.0)) throw Error("joint cutoffs must be >= 0");
  FilteredSet kept = filter_policies(est, n, c.s, c.t);
  if (kept.kept.empty()) throw Error("joint filtration emptied the policy set");
  return interval_over(est, kept.kept, n, c.u, Method::joint);
}

JointResult optimized_joint_ci(const PolicyEstimates& est, std::size_t n,
                               const JointFrontier& frontier,
                               std::span<const JointCutoffs> extra) {
  std::vector<JointCutoffs> candidates = frontier.points;
  candidates.insert(candidates.end(), extra.begin(), extra.end());
  if (candidates.empty()) {
    throw Error(
        "no feasible joint cutoff on the t grid; increase the bootstrap size B or the t grid");
  }
  std::optional<JointResult> best;
  for (const auto& c : candidates) {
    FilteredSet kept = filter_policies(est, n, c.s, c.t);
    Interval iv = interval_over(est, kept.kept, n, c.u, Method::joint);
    if (!best || iv.width() < best->interval.width()) best = JointResult{c, std::move(kept), iv};
  }
  return *best;
}

BandResult compute_bands(const PolicyEstimates& est, const BandConfig& config,
                         Backend backend) {
  BootstrapDraws draws = multiplier_bootstrap(est, config.B, config.seed, backend);
  return compute_bands(est, draws, config, backend);
}

BandResult compute_bands(const PolicyEstimates& est, const BootstrapDraws& draws,
                         const BandConfig& config, Backend backend) {
  BandResult r;
  r.K = est.K;
  const double z = z_alpha_beta(config.alpha, config.beta);
  const double t_beta = sup_quantile(draws, Process::f, 1.0 - config.beta / 2.0);
  r.union_set = first_stage_set(est, est.n, t_beta);
  r.union_interval = union_ci(est, r.union_set, est.n, config.alpha, config.beta);

  const double extra_t[] = {t_beta};
  JointFrontier frontier = joint_frontier(draws, config.alpha, config.t_grid, extra_t, backend);
  const JointCutoffs union_triple[] = {{t_beta, t_beta, z}};
  JointResult joint = optimized_joint_ci(est, est.n, frontier, union_triple);
  r.joint_set = std::move(joint.kept);
  r.joint_interval = joint.interval;
  r.cutoffs = Cutoffs{t_beta, z, joint.cutoffs.s, joint.cutoffs.t, joint.cutoffs.u};
  return r;
}

nlohmann::json to_json(const BandResult& r) {
  auto interval = [](const Interval& iv) {
    return nlohmann::json{{"method", method_name(iv.method)},
                          {"lower", iv.lower},
                          {"upper", iv.upper},
                          {"width", iv.width()}};
  };
  return {{"K", r.K},
          {"cutoffs",
           {{"t_beta", r.cutoffs.t_beta},
            {"z_alpha_beta", r.cutoffs.z_alpha_beta},
            {"s_dag", r.cutoffs.s_dag},
            {"t_dag", r.cutoffs.t_dag},
            {"u_dag", r.cutoffs.u_dag}}},
          {"union", {{"interval", interval(r.union_interval)},
                     {"L_n", r.union_set.L_n},
                     {"kept", r.union_set.kept}}},
          {"joint", {{"interval", interval(r.joint_interval)},
                     {"L_n", r.joint_set.L_n},
                     {"kept", r.joint_set.kept}}}};
}

}  // namespace polband
