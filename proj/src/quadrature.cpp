#include "subheat/quadrature.hpp"

#include "subheat/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace subheat {

QuadResult integrate(const std::function<double(double)>& f, double a, double b, double rel_tol)
{
  QuadResult out;
  if (a == b)
    return out;
  double l1 = 0.0;
  out.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
    f, a, b, 15, rel_tol, &out.error, &l1);
  // boost accumulates |K - G| on the reference interval [-1, 1]; rescaling by
  // the top-level half width gives an upper bound in absolute terms.
  out.error *= std::abs(b - a) / 2.0;
  if (!std::isfinite(out.value))
    throw AccuracyError("quadrature produced a non-finite value", out.error);
  return out;
}

QuadResult integrate_doubling_panels_right(const std::function<double(double)>& g, double lo,
                                           double abs_tol, double first_width, int max_panels)
{
  QuadResult total;
  double a = lo;
  double width = first_width;
  for (int k = 0; k < max_panels; ++k) {
    const QuadResult panel = integrate(g, a, a + width);
    total.value += panel.value;
    total.error += panel.error;
    if (std::abs(panel.value) < abs_tol && k > 0)
      return total;
    a += width;
    width *= 2.0;
  }
  throw AccuracyError("doubling panels did not converge", total.error);
}

QuadResult integrate_doubling_panels(const std::function<double(double)>& g, double center,
                                     double abs_tol, double first_width, int max_panels)
{
  const QuadResult right = integrate_doubling_panels_right(g, center, abs_tol / 2, first_width, max_panels);
  const QuadResult left = integrate_doubling_panels_right(
    [&](double u) { return g(2.0 * center - u); }, center, abs_tol / 2, first_width, max_panels);
  return {right.value + left.value, right.error + left.error};
}

} // namespace subheat
