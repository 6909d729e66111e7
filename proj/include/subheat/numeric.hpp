#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace subheat {

/// Sum with a fixed binary-tree reduction order. The result depends only on
/// the input sequence, never on how work was scheduled.
double pairwise_sum(std::span<const double> values);

/// `count` points log-spaced on [lo, hi], both ends included.
std::vector<double> log_space(double lo, double hi, std::size_t count);

/// Ordinary least squares fit of y = slope * x + intercept.
struct SlopeFit
{
  std::vector<double> x;
  std::vector<double> y;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double window_lo = 0.0;  ///< smallest abscissa before taking logs
  double window_hi = 0.0;  ///< largest abscissa before taking logs
};

/// Fit log(values) against log(abscissae). Requires at least `min_points`
/// strictly positive pairs; throws InvalidGrid otherwise.
SlopeFit log_log_fit(std::span<const double> abscissae,
                     std::span<const double> values,
                     std::size_t min_points = 5);

/// max |a - b| / max |b| over paired entries.
double sup_relative_error(std::span<const double> a, std::span<const double> b);

/// 64-bit FNV-1a; stable across platforms, used for config fingerprints.
std::uint64_t fnv1a64(std::span<const char> bytes);

} // namespace subheat
