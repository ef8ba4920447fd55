#include <doctest.h>

#include <cmath>
#include <array>
#include <cstring>
#include <random>
#include <vector>

#include "polband/kernels.hpp"

using namespace polband;
using namespace polband::kernels;

namespace {

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

std::vector<double> normals(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(count);
  for (auto& x : v) x = z(rng);
  return v;
}

}  // namespace

TEST_CASE("aipw columns: serial reference against a naive loop and the parallel path") {
  for (auto [n, K] : {std::pair<std::size_t, std::size_t>{1, 1}, {7, 3}, {33, 257}, {100, 513}}) {
    std::mt19937_64 rng(n * 31 + K);
    std::vector<std::uint8_t> dec(n * K), act(n);
    for (auto& d : dec) d = rng() & 1;
    for (auto& a : act) a = rng() & 1;
    auto match = normals(n, 1), miss = normals(n, 2);

    std::vector<double> m1(K), s1(K), c1(n * K), m2(K), s2(K), c2(n * K);
    aipw_columns(dec, act, match, miss, K, m1, s1, c1, Backend::serial);
    aipw_columns(dec, act, match, miss, K, m2, s2, c2, Backend::parallel);
    CHECK(same_bits(m1, m2));
    CHECK(same_bits(s1, s2));
    CHECK(same_bits(c1, c2));

    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> v(n);
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = dec[i * K + k] == act[i] ? match[i] : miss[i];
        mean += v[i];
      }
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      CHECK(m1[k] == doctest::Approx(mean).epsilon(1e-12));
      CHECK(s1[k] == doctest::Approx(std::sqrt(ss / static_cast<double>(n))).epsilon(1e-12));
      CHECK(c1[(n - 1) * K + k] == doctest::Approx(v[n - 1] - mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("multiplier sums match the naive product, bit for bit across backends") {
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 17, 5}, {101, 37, 300}, {64, 200, 9}};
  for (const auto& shape : shapes) {
    const std::size_t B = shape[0], n = shape[1], K = shape[2];
    auto eps = normals(B * n, 5), vals = normals(n * K, 6);
    std::vector<double> o1(B * K), o2(B * K);
    multiplier_sums(eps, vals, B, n, K, o1, Backend::serial);
    multiplier_sums(eps, vals, B, n, K, o2, Backend::parallel);
    CHECK(same_bits(o1, o2));
    for (std::size_t j = 0; j < B; j += std::max<std::size_t>(1, B / 5)) {
      for (std::size_t k = 0; k < K; k += std::max<std::size_t>(1, K / 4)) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += eps[j * n + i] * vals[i * K + k];
        CHECK(o1[j * K + k] == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("studentized columns have mean 0 and SD 1") {
  const std::size_t B = 500, K = 300;
  auto d = normals(B * K, 9);
  for (std::size_t j = 0; j < B; ++j)
    for (std::size_t k = 0; k < K; ++k) d[j * K + k] = 3.0 + 2.5 * d[j * K + k] + k;
  // column 4 is constant
  for (std::size_t j = 0; j < B; ++j) d[j * K + 4] = 7.0;
  auto p = d;
  studentize_columns(d, B, K, Backend::serial);
  studentize_columns(p, B, K, Backend::parallel);
  CHECK(same_bits(d, p));
  for (std::size_t k = 0; k < K; ++k) {
    double m = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < B; ++j) m += d[j * K + k];
    m /= B;
    for (std::size_t j = 0; j < B; ++j) ss += (d[j * K + k] - m) * (d[j * K + k] - m);
    CHECK(std::abs(m) < 1e-9);
    if (k == 4) {
      CHECK(ss == 0.0);
    } else {
      CHECK(std::abs(std::sqrt(ss / B) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("row extrema") {
  const std::size_t B = 77, K = 301;
  auto d = normals(B * K, 12);
  std::vector<double> mx1(B), mn1(B), mx2(B), mn2(B);
  row_extrema(d, B, K, mx1, mn1, Backend::serial);
  row_extrema(d, B, K, mx2, mn2, Backend::parallel);
  CHECK(same_bits(mx1, mx2));
  CHECK(same_bits(mn1, mn2));
  for (std::size_t j = 0; j < B; ++j) {
    double hi = -INFINITY, lo = INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      hi = std::max(hi, d[j * K + k]);
      lo = std::min(lo, d[j * K + k]);
    }
    CHECK(mx1[j] == hi);
    CHECK(mn1[j] == lo);
  }
}
