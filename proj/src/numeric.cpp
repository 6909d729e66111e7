#include "subheat/numeric.hpp"

#include "subheat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace subheat {

namespace {

double pairwise_sum_impl(const double* data, std::size_t count)
{
  if (count <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      s += data[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, count - half);
}

} // namespace

double pairwise_sum(std::span<const double> values)
{
  return pairwise_sum_impl(values.data(), values.size());
}

std::vector<double> log_space(double lo, double hi, std::size_t count)
{
  if (count < 2 || !(lo > 0.0) || !(hi > lo))
    throw InvalidGrid("log_space needs count >= 2 and 0 < lo < hi");
  std::vector<double> out(count);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

SlopeFit log_log_fit(std::span<const double> abscissae,
                     std::span<const double> values,
                     std::size_t min_points)
{
  if (abscissae.size() != values.size())
    throw InvalidGrid("log_log_fit: size mismatch");
  SlopeFit fit;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (abscissae[i] > 0.0 && values[i] > 0.0 && std::isfinite(values[i])) {
      if (fit.x.empty()) {
        lo = hi = abscissae[i];
      }
      lo = std::min(lo, abscissae[i]);
      hi = std::max(hi, abscissae[i]);
      fit.x.push_back(std::log(abscissae[i]));
      fit.y.push_back(std::log(values[i]));
    }
  }
  if (fit.x.size() < min_points)
    throw InvalidGrid("log_log_fit: fewer than " + std::to_string(min_points) +
                      " usable points");
  const auto n = static_cast<double>(fit.x.size());
  const double mx = pairwise_sum(fit.x) / n;
  const double my = pairwise_sum(fit.y) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    const double dx = fit.x[i] - mx;
    const double dy = fit.y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0))
    throw InvalidGrid("log_log_fit: abscissae are all equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.window_lo = lo;
  fit.window_hi = hi;
  return fit;
}

double sup_relative_error(std::span<const double> a, std::span<const double> b)
{
  double num = 0.0, den = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

std::uint64_t fnv1a64(std::span<const char> bytes)
{
  std::uint64_t h = 14695981039346656037ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace subheat
