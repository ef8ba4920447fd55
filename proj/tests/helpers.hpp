#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "polband/model.hpp"
#include "polband/nuisance.hpp"

namespace testutil {

using namespace polband;

// n draws with x ~ U[-1,1]^d, a ~ Bernoulli(0.5), y* = a*x1 + noise,
// y† = a*(x1 + 0.3) + noise.
inline Dataset small_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                             double noise = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> z;
  std::vector<double> xs(n * d);
  std::vector<std::uint8_t> a(n);
  std::vector<double> ys(n), yd(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) xs[i * d + k] = u(rng);
    a[i] = static_cast<std::uint8_t>(i % 2 == 0 ? (u(rng) > 0.0) : (i % 4 == 1));
    const double x = xs[i * d];
    ys[i] = a[i] * x + noise * z(rng);
    yd[i] = a[i] * (x + 0.3) + noise * z(rng);
  }
  return Dataset(Features(d, std::move(xs)), std::move(a), std::move(ys), std::move(yd));
}

// Table holding supplied nuisance functions evaluated at every row.
template <class P1, class M>
NuisanceTable table_from(const Dataset& data, P1 p1, M reg) {
  NuisanceTable t;
  const std::size_t n = data.size();
  t.p1.resize(n);
  for (int a = 0; a < 2; ++a) {
    t.primary[a].resize(n);
    t.subsidiary[a].resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto x = data.x(i);
    t.p1[i] = p1(x);
    for (int a = 0; a < 2; ++a) {
      t.primary[a][i] = reg(Outcome::primary, a, x);
      t.subsidiary[a][i] = reg(Outcome::subsidiary, a, x);
    }
  }
  return t;
}

}  // namespace testutil
