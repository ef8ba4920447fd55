#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP implementation; both accumulate in the same order and agree bit for
// bit, so the serial path doubles as the test oracle for the parallel one.

#include <cstddef>
#include <cstdint>
#include <span>

#include "polband/parallel.hpp"

namespace polband::kernels {

/// Per-policy AIPW columns.
///
/// `decisions` is n x K row-major. For observation i, `match[i]` is the
/// pseudo-outcome when the policy agrees with the observed action and
/// `mismatch[i]` the regression at the other action. Outputs:
/// `mean[k]`, `sd[k]` (denominator n) and the centered values in
/// `centered` (n x K row-major).
void aipw_columns(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> actions,
                  std::span<const double> match, std::span<const double> mismatch,
                  std::size_t K, std::span<double> mean, std::span<double> sd,
                  std::span<double> centered, Backend backend);

/// out[j, k] = sum_i eps[j, i] * values[i, k], summed over i in order.
/// eps is B x n, values n x K, out B x K (all row-major).
void multiplier_sums(std::span<const double> eps, std::span<const double> values, std::size_t B,
                     std::size_t n, std::size_t K, std::span<double> out, Backend backend);

/// Rescales every column of the B x K matrix to mean 0 and SD 1
/// (denominator B). Columns with zero spread are only centered.
void studentize_columns(std::span<double> draws, std::size_t B, std::size_t K, Backend backend);

/// Row-wise maximum and minimum of a B x K matrix.
void row_extrema(std::span<const double> draws, std::size_t B, std::size_t K,
                 std::span<double> row_max, std::span<double> row_min, Backend backend);

}  // namespace polband::kernels
