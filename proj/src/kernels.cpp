#include "polband/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace polband::kernels {

namespace {

constexpr std::size_t kRowBlock = 8;
constexpr std::size_t kColBlock = 256;

void aipw_columns_serial(std::span<const std::uint8_t> decisions,
                         std::span<const std::uint8_t> actions, std::span<const double> match,
                         std::span<const double> mismatch, std::size_t K,
                         std::span<double> mean, std::span<double> sd,
                         std::span<double> centered) {
  const std::size_t n = actions.size();
  for (std::size_t k = 0; k < K; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += decisions[i * K + k] == actions[i] ? match[i] : mismatch[i];
    }
    const double m = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = (decisions[i * K + k] == actions[i] ? match[i] : mismatch[i]) - m;
      centered[i * K + k] = c;
      ss += c * c;
    }
    mean[k] = m;
    sd[k] = std::sqrt(ss / static_cast<double>(n));
  }
}

// Same per-column arithmetic as the serial version, traversed row-wise over a
// block of columns so the inner loop is contiguous.
void aipw_block(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> actions,
                std::span<const double> match, std::span<const double> mismatch, std::size_t K,
                std::size_t k0, std::size_t k1, std::span<double> mean, std::span<double> sd,
                std::span<double> centered) {
  const std::size_t n = actions.size();
  const std::size_t w = k1 - k0;
  double sums[kColBlock];
  std::fill(sums, sums + w, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* dec = decisions.data() + i * K + k0;
    const std::uint8_t a = actions[i];
    const double hit = match[i], miss = mismatch[i];
    for (std::size_t c = 0; c < w; ++c) sums[c] += dec[c] == a ? hit : miss;
  }
  double means[kColBlock];
  for (std::size_t c = 0; c < w; ++c) {
    means[c] = sums[c] / static_cast<double>(n);
    sums[c] = 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* dec = decisions.data() + i * K + k0;
    double* out = centered.data() + i * K + k0;
    const std::uint8_t a = actions[i];
    const double hit = match[i], miss = mismatch[i];
    for (std::size_t c = 0; c < w; ++c) {
      double v = (dec[c] == a ? hit : miss) - means[c];
      out[c] = v;
      sums[c] += v * v;
    }
  }
  for (std::size_t c = 0; c < w; ++c) {
    mean[k0 + c] = means[c];
    sd[k0 + c] = std::sqrt(sums[c] / static_cast<double>(n));
  }
}

void multiplier_sums_serial(std::span<const double> eps, std::span<const double> values,
                            std::size_t B, std::size_t n, std::size_t K, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < B; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double e = eps[j * n + i];
      for (std::size_t k = 0; k < K; ++k) out[j * K + k] += e * values[i * K + k];
    }
  }
}

void multiplier_block(std::span<const double> eps, std::span<const double> values,
                      std::size_t B, std::size_t n, std::size_t K, std::size_t j0,
                      std::size_t k0, std::span<double> out) {
  const std::size_t jn = std::min(kRowBlock, B - j0);
  const std::size_t w = std::min(kColBlock, K - k0);
  alignas(64) double acc[kRowBlock][kColBlock];
  for (std::size_t r = 0; r < jn; ++r) std::fill(acc[r], acc[r] + w, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = values.data() + i * K + k0;
    for (std::size_t r = 0; r < jn; ++r) {
      const double e = eps[(j0 + r) * n + i];
      double* a = acc[r];
#pragma omp simd
      for (std::size_t c = 0; c < w; ++c) a[c] += e * v[c];
    }
  }
  for (std::size_t r = 0; r < jn; ++r) {
    std::copy(acc[r], acc[r] + w, out.data() + (j0 + r) * K + k0);
  }
}

void studentize_column(std::span<double> draws, std::size_t B, std::size_t K, std::size_t k) {
  double sum = 0.0;
  for (std::size_t j = 0; j < B; ++j) sum += draws[j * K + k];
  const double m = sum / static_cast<double>(B);
  double ss = 0.0;
  for (std::size_t j = 0; j < B; ++j) {
    double c = draws[j * K + k] - m;
    ss += c * c;
  }
  const double sd = std::sqrt(ss / static_cast<double>(B));
  for (std::size_t j = 0; j < B; ++j) {
    double c = draws[j * K + k] - m;
    draws[j * K + k] = sd > 0.0 ? c / sd : c;
  }
}

}  // namespace

void aipw_columns(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> actions,
                  std::span<const double> match, std::span<const double> mismatch,
                  std::size_t K, std::span<double> mean, std::span<double> sd,
                  std::span<double> centered, Backend backend) {
  if (backend == Backend::serial) {
    aipw_columns_serial(decisions, actions, match, mismatch, K, mean, sd, centered);
    return;
  }
  const std::size_t blocks = (K + kColBlock - 1) / kColBlock;
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t k0 = b * kColBlock;
    aipw_block(decisions, actions, match, mismatch, K, k0, std::min(K, k0 + kColBlock), mean,
               sd, centered);
  }
}

void multiplier_sums(std::span<const double> eps, std::span<const double> values, std::size_t B,
                     std::size_t n, std::size_t K, std::span<double> out, Backend backend) {
  if (backend == Backend::serial) {
    multiplier_sums_serial(eps, values, B, n, K, out);
    return;
  }
  const std::size_t row_blocks = (B + kRowBlock - 1) / kRowBlock;
  const std::size_t col_blocks = (K + kColBlock - 1) / kColBlock;
  const std::size_t tasks = row_blocks * col_blocks;
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < tasks; ++t) {
    multiplier_block(eps, values, B, n, K, (t / col_blocks) * kRowBlock,
                     (t % col_blocks) * kColBlock, out);
  }
}

void studentize_columns(std::span<double> draws, std::size_t B, std::size_t K,
                        Backend backend) {
  if (backend == Backend::serial) {
    for (std::size_t k = 0; k < K; ++k) studentize_column(draws, B, K, k);
    return;
  }
  const std::size_t blocks = (K + kColBlock - 1) / kColBlock;
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t k0 = b * kColBlock;
    const std::size_t w = std::min(kColBlock, K - k0);
    double mean[kColBlock], ss[kColBlock];
    std::fill(mean, mean + w, 0.0);
    std::fill(ss, ss + w, 0.0);
    for (std::size_t j = 0; j < B; ++j) {
      const double* r = draws.data() + j * K + k0;
      for (std::size_t c = 0; c < w; ++c) mean[c] += r[c];
    }
    for (std::size_t c = 0; c < w; ++c) mean[c] /= static_cast<double>(B);
    for (std::size_t j = 0; j < B; ++j) {
      const double* r = draws.data() + j * K + k0;
      for (std::size_t c = 0; c < w; ++c) {
        double d = r[c] - mean[c];
        ss[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < w; ++c) ss[c] = std::sqrt(ss[c] / static_cast<double>(B));
    for (std::size_t j = 0; j < B; ++j) {
      double* r = draws.data() + j * K + k0;
      for (std::size_t c = 0; c < w; ++c) {
        double d = r[c] - mean[c];
        r[c] = ss[c] > 0.0 ? d / ss[c] : d;
      }
    }
  }
}

void row_extrema(std::span<const double> draws, std::size_t B, std::size_t K,
                 std::span<double> row_max, std::span<double> row_min, Backend backend) {
  auto one = [&](std::size_t j) {
    const double* r = draws.data() + j * K;
    auto [lo, hi] = std::minmax_element(r, r + K);
    row_max[j] = *hi;
    row_min[j] = *lo;
  };
  if (backend == Backend::serial) {
    for (std::size_t j = 0; j < B; ++j) one(j);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < B; ++j) one(j);
}

}  // namespace polband::kernels
