#include <algorithm>
#include <array>
#include <random>

#include "polband/bands.hpp"
#include "polband/rng.hpp"

namespace polband {

namespace {

struct Candidate {
  std::array<double, 3> a;
  double value;
};

}  // namespace

Policy optimize_over_class(const std::function<double(const Policy&)>& objective,
                           ClassKind kind, ClassBounds bounds, int budget, std::uint64_t seed) {
  if (budget < 1) throw Error("optimizer budget must be at least 1");
  if (!(bounds.lo < bounds.hi)) throw Error("optimizer bounds need lo < hi");

  if (kind == ClassKind::threshold) {
    PolicyGrid grid = grid_threshold(bounds.lo, bounds.hi, bounds.grid_points);
    std::size_t best = 0;
    double best_value = objective(grid[0]);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      double v = objective(grid[k]);
      if (v > best_value) {
        best_value = v;
        best = k;
      }
    }
    return grid[best];
  }

  int evals = 0;
  auto eval = [&](const std::array<double, 3>& a) {
    ++evals;
    return objective(Policy::box(a[0], a[1], a[2]));
  };

  // Random search spends half the budget; the rest refines the best starts.
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(StreamRole::optimizer)));
  std::uniform_real_distribution<double> unif(bounds.lo, bounds.hi);
  const int n_random = std::max(1, budget / 2);
  std::vector<Candidate> starts;
  starts.reserve(static_cast<std::size_t>(n_random));
  for (int s = 0; s < n_random; ++s) {
    std::array<double, 3> a{unif(rng), unif(rng), unif(rng)};
    starts.push_back({a, eval(a)});
  }
  std::stable_sort(starts.begin(), starts.end(),
                   [](const Candidate& x, const Candidate& y) { return x.value > y.value; });
  Candidate best = starts.front();

  const std::size_t n_refine = std::min<std::size_t>(3, starts.size());
  for (std::size_t s = 0; s < n_refine && evals < budget; ++s) {
    const int stop = evals + (budget - evals) / static_cast<int>(n_refine - s);
    Candidate cur = starts[s];
    double step = (bounds.hi - bounds.lo) / 8.0;
    const double min_step = (bounds.hi - bounds.lo) * 1e-6;
    while (evals < stop && step > min_step) {
      bool improved = false;
      for (int k = 0; k < 3 && evals < stop; ++k) {
        for (double dir : {1.0, -1.0}) {
          if (evals >= stop) break;
          auto trial = cur.a;
          trial[k] = std::clamp(trial[k] + dir * step, bounds.lo, bounds.hi);
          if (trial[k] == cur.a[k]) continue;
          double v = eval(trial);
          if (v > cur.value) {
            cur = {trial, v};
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (cur.value > best.value) best = cur;
  }
  return Policy::box(best.a[0], best.a[1], best.a[2]);
}

}  // namespace polband
