#pragma once

#include <functional>

namespace subheat {

struct QuadResult
{
  double value = 0.0;
  double error = 0.0;  ///< estimated absolute error
};

/// Adaptive Gauss-Kronrod (31 point) on the finite interval [a, b].
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = 1e-12);

/// Integral of g over the whole real line, assembled from panels that start
/// at `center` and double in width outwards in both directions. Stops in
/// each direction once a panel contributes less than `abs_tol`. Intended
/// for integrands already log-substituted, which decay exponentially.
QuadResult integrate_doubling_panels(const std::function<double(double)>& g, double center,
                                     double abs_tol, double first_width = 1.0,
                                     int max_panels = 64);

/// Same as above but only on [lo, +inf).
QuadResult integrate_doubling_panels_right(const std::function<double(double)>& g, double lo,
                                           double abs_tol, double first_width = 1.0,
                                           int max_panels = 64);

} // namespace subheat
