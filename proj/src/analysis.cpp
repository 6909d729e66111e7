#include "subheat/analysis.hpp"

#include "subheat/errors.hpp"
#include "subheat/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace subheat {

namespace {

constexpr double regime_eps = 1e-9;

double abs_pow(double x, double p)
{
  const double a = std::abs(x);
  return p == 1.0 ? a : p == 2.0 ? a * a : std::pow(a, p);
}

bool is_constant(const Eigen::VectorXd& f)
{
  return f.size() == 0 || f.maxCoeff() - f.minCoeff() == 0.0;
}

double lp_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& mu, double q)
{
  std::vector<double> terms(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i)
    terms[static_cast<std::size_t>(i)] = abs_pow(f(i), q) * mu(i);
  return std::pow(pairwise_sum(terms), 1.0 / q);
}

double mass(const Eigen::VectorXd& mu, std::span<const int> nodes)
{
  std::vector<double> terms;
  terms.reserve(nodes.size());
  for (int i : nodes)
    terms.push_back(mu(i));
  return pairwise_sum(terms);
}

InequalityReport base_report(const std::string& name, const MetricMeasureGraph& graph, double delta,
                             double p)
{
  InequalityReport r;
  r.name = name;
  r.space = space_label(graph);
  r.delta = delta;
  r.p = p;
  r.resolution = graph.descriptor().resolution;
  return r;
}

void check_delta(double delta, const char* where)
{
  if (!(delta > 0.0 && delta <= 1.0))
    throw DomainError(std::string(where) + ": delta must lie in (0, 1]");
}

double graph_kappa(const MetricMeasureGraph& graph, const char* where)
{
  if (!graph.geometry().kappa)
    throw ConfigurationError(std::string(where) + ": kappa is unset");
  return *graph.geometry().kappa;
}

Eigen::VectorXd semigroup(const SpectralDecomposition& spec, double delta, double t,
                          const Eigen::VectorXd& f)
{
  return spec.apply([delta, t](double lambda) { return std::exp(-t * std::pow(lambda, delta)); }, f);
}

KernelMatrix kernel_at(const SpectralDecomposition& spec, double delta, double t)
{
  return delta == 1.0 ? heat_kernel(spec, t) : subordinated_kernel(spec, delta, t);
}

} // namespace

TimeWindow exponent_window(const MetricMeasureGraph& graph, const SpectralDecomposition& spec, double delta,
                           double decades)
{
  if (!(decades > 0.0))
    throw InvalidGrid("exponent_window: decades must be positive");
  TimeWindow w = resolved_time_window(graph, spec, delta);
  w.hi = std::min(w.hi, w.lo * std::pow(10.0, decades));
  return w;
}

std::vector<double> exponent_grid(const MetricMeasureGraph& graph, const SpectralDecomposition& spec,
                                  double delta, std::size_t count, double decades)
{
  const TimeWindow w = exponent_window(graph, spec, delta, decades);
  return log_space(w.lo, w.hi, count);
}

std::string space_label(const MetricMeasureGraph& graph)
{
  const auto& d = graph.descriptor();
  const bool fractal = d.kind == SpaceKind::gasket || d.kind == SpaceKind::vicsek;
  std::string s = to_string(d.kind) + (fractal ? " m=" : " n=") + std::to_string(d.resolution);
  if (d.boundary == BoundaryMode::absorbing)
    s += " absorbing";
  return s;
}

void InequalityReport::set(const std::string& key, double value)
{
  for (auto& [k, v] : values) {
    if (k == key) {
      v = value;
      return;
    }
  }
  values.emplace_back(key, value);
}

double InequalityReport::get(const std::string& key) const
{
  for (const auto& [k, v] : values)
    if (k == key)
      return v;
  throw std::out_of_range("InequalityReport: no value named " + key);
}

InequalityReport compare_levels(const InequalityReport& coarse, const InequalityReport& fine,
                                std::span<const std::string> keys, double tolerance)
{
  InequalityReport r = fine;
  r.name = fine.name + "_levels";
  r.values.clear();
  r.tolerance = tolerance;
  r.inconclusive = coarse.inconclusive || fine.inconclusive;
  bool stable = true;
  double worst = 0.0;
  for (const auto& key : keys) {
    const double a = coarse.get(key);
    const double b = fine.get(key);
    const double change = a == 0.0 ? (b == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                   : std::abs(b - a) / std::abs(a);
    r.set(key + "_coarse", a);
    r.set(key + "_fine", b);
    r.set(key + "_change", change);
    worst = std::max(worst, change);
    stable = stable && change <= tolerance;
  }
  r.constant = worst;
  r.set("coarse_resolution", coarse.resolution);
  r.pass = !r.inconclusive && coarse.pass && fine.pass && stable;
  return r;
}

double slope_standard_error(const SlopeFit& fit)
{
  const std::size_t n = fit.x.size();
  if (n < 3)
    return std::numeric_limits<double>::infinity();
  const double mx = std::accumulate(fit.x.begin(), fit.x.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (fit.x[i] - mx) * (fit.x[i] - mx);
    const double e = fit.y[i] - (fit.slope * fit.x[i] + fit.intercept);
    ssr += e * e;
  }
  return std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
}

double beta_p(double p, double kappa, double d_W)
{
  return (1.0 - 2.0 / p) * kappa / d_W + 1.0 / p;
}

double predicted_critical_exponent(double p, double delta, double kappa, double d_W)
{
  if (p == 1.0)
    return std::min(1.0, (1.0 - kappa / d_W) / delta);
  if (p >= 2.0)
    return 1.0 / p;
  throw DomainError("predicted_critical_exponent: only a bracket is known for 1 < p < 2");
}

CriticalExponentReport critical_exponent(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                         double delta, double p, std::span<const TestFunction> family,
                                         std::span<const double> t_grid, std::optional<double> kappa,
                                         double tolerance)
{
  if (family.empty())
    throw ConfigurationError("critical_exponent: empty family");
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError("critical_exponent: delta must lie in (0, 1)");
  if (!(p >= 1.0))
    throw DomainError("critical_exponent: p must be at least 1");

  CriticalExponentReport r;
  r.p = p;
  r.delta = delta;
  r.tolerance = tolerance;
  const double d_W = graph.geometry().d_W;
  if (p < 2.0) {
    r.kappa = kappa ? *kappa : graph_kappa(graph, "critical_exponent");
    r.beta_p = beta_p(p, r.kappa, d_W);
  } else if (kappa || graph.geometry().kappa) {
    r.kappa = kappa ? *kappa : *graph.geometry().kappa;
    r.beta_p = beta_p(p, r.kappa, d_W);
  }
  if (p == 1.0 || p >= 2.0) {
    r.prediction = predicted_critical_exponent(p, delta, r.kappa, d_W);
    r.has_point_prediction = true;
  } else {
    r.bracket_lo = 1.0 / (2.0 * delta);
    r.bracket_hi = std::min(r.beta_p / delta, 1.0 / p);
  }

  const auto curves = energy_curves(spec, family, p, delta, t_grid);
  bool any = false;
  for (const auto& c : curves) {
    std::vector<double> root(c.energies.size());
    for (std::size_t i = 0; i < root.size(); ++i)
      root[i] = std::pow(c.energies[i], 1.0 / p);
    SlopeFit fit;
    try {
      fit = log_log_fit(c.grid, root);
    } catch (const InvalidGrid&) {
      continue;  // constant member
    }
    if (fit.r_squared >= min_r_squared && (!any || fit.slope > r.estimate)) {
      r.estimate = fit.slope;
      r.witness = c.function_id;
      any = true;
    }
    r.fits.emplace_back(c.function_id, std::move(fit));
  }
  r.curves = curves;
  if (!any) {
    r.inconclusive = true;
    return r;
  }
  if (r.has_point_prediction) {
    r.pass = std::abs(r.estimate - r.prediction) <= tolerance;
  } else if (r.bracket_lo > r.bracket_hi) {
    r.inconclusive = true;
  } else {
    r.pass = r.estimate >= r.bracket_lo - tolerance && r.estimate <= r.bracket_hi + tolerance;
  }
  return r;
}

WeakBeReport weak_be_fit(const SpectralDecomposition& spec, const MetricMeasureGraph& graph, double delta,
                         std::span<const TestFunction> family, std::span<const double> t_grid,
                         std::uint64_t seed, std::size_t sampled_pairs)
{
  check_delta(delta, "weak_be_fit");
  if (family.empty())
    throw ConfigurationError("weak_be_fit: empty family");
  if (t_grid.size() < 5)
    throw InvalidGrid("weak_be_fit: need at least 5 times");
  const int n = static_cast<int>(graph.node_count());
  const double d_W = graph.geometry().d_W;

  // Pairs grouped by distance; per time only the largest difference at each
  // distance matters.
  std::vector<std::pair<int, int>> pairs;
  if (n <= 2000) {
    pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        pairs.emplace_back(i, j);
  } else {
    std::mt19937_64 rng(seed);
    pairs.reserve(sampled_pairs);
    while (pairs.size() < sampled_pairs) {
      const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (i != j)
        pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::vector<double> dist(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k)
    dist[k] = graph.distance(pairs[k].first, pairs[k].second);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  std::vector<double> bucket_distance;
  std::vector<std::size_t> bucket(pairs.size());
  for (std::size_t k : order) {
    if (bucket_distance.empty() || dist[k] > bucket_distance.back() * (1.0 + 1e-12))
      bucket_distance.push_back(dist[k]);
    bucket[k] = bucket_distance.size() - 1;
  }
  const std::size_t nb = bucket_distance.size();

  std::vector<std::vector<double>> largest(t_grid.size(), std::vector<double>(nb, 0.0));
  parallel_for(t_grid.size(), [&](std::size_t ti) {
    auto& row = largest[ti];
    for (const auto& g : family) {
      if (is_constant(g.values))
        continue;
      const Eigen::VectorXd v = semigroup(spec, delta, t_grid[ti], g.values);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double diff = std::abs(v(pairs[k].first) - v(pairs[k].second));
        row[bucket[k]] = std::max(row[bucket[k]], diff);
      }
    }
  });

  auto quotient = [&](double kappa, std::vector<std::size_t>* argmax) {
    std::vector<double> h(t_grid.size(), 0.0);
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
      std::size_t best = 0;
      const double reach = std::max(bucket_distance.front(), std::pow(t_grid[ti], 1.0 / (delta * d_W)));
      for (std::size_t b = 0; b < nb && bucket_distance[b] <= reach * (1.0 + 1e-12); ++b) {
        const double q = largest[ti][b] / std::pow(bucket_distance[b], kappa);
        if (q > h[ti]) {
          h[ti] = q;
          best = b;
        }
      }
      if (argmax)
        argmax->push_back(best);
    }
    return h;
  };

  WeakBeReport r;
  r.delta = delta;
  r.pair_count = pairs.size();
  // Every kappa below the true exponent also solves the fixed-point equation;
  // one step from kappa = d_W puts the argmax at the smallest distances and
  // lands on the largest solution.
  r.fit = log_log_fit(t_grid, quotient(d_W, nullptr));
  const double kappa = std::clamp(-r.fit.slope * delta * d_W, 1e-3, d_W);
  const SlopeFit check = log_log_fit(t_grid, quotient(kappa, nullptr));
  r.fixed_point_residual = -check.slope * delta * d_W - kappa;
  r.converged = std::abs(r.fixed_point_residual) <= 0.1 * kappa;
  r.kappa_hat = kappa;
  const double se = slope_standard_error(r.fit) * delta * d_W;
  r.ci_lo = kappa - 1.96 * se;
  r.ci_hi = kappa + 1.96 * se;
  const auto& geo = graph.geometry();
  r.reference_kappa = geo.kappa && geo.kappa_provenance == Provenance::analytic ? *geo.kappa : kappa;
  std::vector<std::size_t> argmax;
  const auto h = quotient(r.reference_kappa, &argmax);
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
    r.constant = std::max(r.constant, h[ti] * std::pow(t_grid[ti], r.reference_kappa / (delta * d_W)));
  r.nearest_neighbor_argmax = argmax.front() == 0;
  r.inconclusive = !r.converged || r.fit.r_squared < min_r_squared;
  return r;
}

InequalityReport coarea_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph, double delta,
                              const Eigen::VectorXd& f, double alpha, std::span<const double> t_grid,
                              std::size_t levels)
{
  check_delta(delta, "coarea_check");
  if (f.size() != static_cast<Eigen::Index>(graph.node_count()))
    throw DomainError("coarea_check: size mismatch");
  if (f.minCoeff() < 0.0)
    throw DomainError("coarea_check: f must be nonnegative");
  if (levels < 2)
    throw DomainError("coarea_check: need at least 2 levels");
  InequalityReport r = base_report("coarea", graph, delta, 1.0);
  r.window_lo = t_grid.front();
  r.window_hi = t_grid.back();
  r.set("alpha", alpha);
  if (is_constant(f)) {
    r.pass = true;
    r.note = "constant f";
    return r;
  }
  const Eigen::VectorXd& mu = graph.measure();
  const auto n = f.size();

  // mu-weighted quantile levels of f, always including min and max.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return f(a) < f(b); });
  const double total = mu.sum();
  std::vector<double> level{f(idx.front())};
  double cum = 0.0;
  std::size_t next = 1;
  for (Eigen::Index i : idx) {
    cum += mu(i);
    while (next < levels && cum >= total * static_cast<double>(next) / static_cast<double>(levels)) {
      if (f(i) > level.back())
        level.push_back(f(i));
      ++next;
    }
  }
  if (f(idx.back()) > level.back())
    level.push_back(f(idx.back()));

  Eigen::VectorXd fq(n);
  for (Eigen::Index i = 0; i < n; ++i)
    fq(i) = *(std::upper_bound(level.begin(), level.end(), f(i)) - 1);

  // Slices 1_{fq > level[j]} for j = 0 .. L-2 with widths level[j+1] - level[j].
  const std::size_t slices = level.size() - 1;
  std::vector<Eigen::VectorXd> indicator(slices, Eigen::VectorXd::Zero(n));
  std::vector<double> width(slices);
  for (std::size_t j = 0; j < slices; ++j) {
    width[j] = level[j + 1] - level[j];
    for (Eigen::Index i = 0; i < n; ++i)
      indicator[j](i) = fq(i) > level[j] ? 1.0 : 0.0;
  }

  std::vector<double> layers(slices + 1);
  layers[0] = level.front() * total;
  for (std::size_t j = 0; j < slices; ++j)
    layers[j + 1] = width[j] * indicator[j].dot(mu);
  const double layer_cake = pairwise_sum(layers);
  const double l1 = lp_norm(fq, mu, 1.0);

  std::vector<double> lhs_t(t_grid.size());
  std::vector<std::vector<double>> slice_t(t_grid.size(), std::vector<double>(slices));
  parallel_for(t_grid.size(), [&](std::size_t ti) {
    const KernelMatrix k = kernel_at(spec, delta, t_grid[ti]);
    const double scale = std::pow(t_grid[ti], -alpha);
    lhs_t[ti] = scale * besov_energy(k, mu, fq, 1.0);
    for (std::size_t j = 0; j < slices; ++j)
      slice_t[ti][j] = scale * besov_energy(k, mu, indicator[j], 1.0);
  });
  r.lhs = *std::max_element(lhs_t.begin(), lhs_t.end());
  std::vector<double> terms(slices);
  for (std::size_t j = 0; j < slices; ++j) {
    double m = 0.0;
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
      m = std::max(m, slice_t[ti][j]);
    terms[j] = width[j] * m;
  }
  r.rhs = pairwise_sum(terms);
  r.constant = r.lhs / r.rhs;
  r.set("levels", static_cast<double>(level.size()));
  r.set("quantization_error", (f - fq).cwiseAbs().maxCoeff());
  r.set("layer_cake_error", std::abs(layer_cake - l1));
  r.set("c1", r.lhs / r.rhs);
  r.set("c2", r.lhs / r.rhs);
  r.tolerance = 1e-6;
  r.pass = std::isfinite(r.constant) && r.constant > 0.0 && r.get("layer_cake_error") <= 1e-6 * std::max(1.0, l1);
  return r;
}

InequalityReport pseudo_poincare_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                       double delta, const TestFunction& f, std::span<const double> t_grid,
                                       std::span<const double> radii, double tolerance)
{
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError("pseudo_poincare_check: delta must lie in (0, 1)");
  const double kappa = graph_kappa(graph, "pseudo_poincare_check");
  const double d_W = graph.geometry().d_W;
  const double alpha = predicted_critical_exponent(1.0, delta, kappa, d_W);
  InequalityReport r = base_report("pseudo_poincare", graph, delta, 1.0);
  r.window_lo = t_grid.front();
  r.window_hi = t_grid.back();
  r.tolerance = tolerance;
  r.note = f.id;
  const Eigen::VectorXd& mu = graph.measure();
  std::vector<double> gap(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    gap[i] = lp_norm(semigroup(spec, delta, t_grid[i], f.values) - f.values, mu, 1.0);
  });
  const bool critical_one = alpha >= 1.0;
  r.rhs = critical_one ? w_norm(graph, f.values, delta * d_W, 1.0) : variation(graph, f.values, radii, kappa);
  r.lhs = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    r.lhs = std::max(r.lhs, gap[i] / std::pow(t_grid[i], alpha));
  r.constant = r.lhs / r.rhs;
  SlopeFit fit = log_log_fit(t_grid, gap);
  r.set("alpha", alpha);
  r.set("slope", fit.slope);
  r.set("r_squared", fit.r_squared);
  r.set("rhs_is_w_norm", critical_one ? 1.0 : 0.0);
  r.inconclusive = fit.r_squared < min_r_squared;
  r.pass = !r.inconclusive && fit.slope >= alpha - tolerance && std::isfinite(r.constant);
  return r;
}

InequalityReport sobolev_check(const MetricMeasureGraph& graph, double delta, double p,
                               std::span<const TestFunction> family)
{
  check_delta(delta, "sobolev_check");
  const double d_H = graph.geometry().d_H;
  const double d_W = graph.geometry().d_W;
  if (!(d_H > delta * d_W + regime_eps))
    throw WrongRegime("sobolev_check: needs d_H > delta d_W; use linfty_check when d_H = delta d_W");
  if (!(p >= 1.0))
    throw DomainError("sobolev_check: p must be at least 1");
  const double q = p * d_H / (d_H - delta * d_W);
  InequalityReport r = base_report("sobolev", graph, delta, p);
  r.set("q", q);
  const Eigen::VectorXd& mu = graph.measure();
  const double mu_total = mu.sum();
  for (const auto& f : family) {
    if (is_constant(f.values))
      continue;
    const Eigen::VectorXd g = f.values.array() - f.values.dot(mu) / mu_total;
    const double lhs = lp_norm(g, mu, q);
    const double rhs = w_norm(graph, f.values, delta * d_W / p, p);
    r.set("ratio:" + f.id, lhs / rhs);
    if (lhs / rhs > r.constant) {
      r.constant = lhs / rhs;
      r.lhs = lhs;
      r.rhs = rhs;
      r.note = f.id;
    }
  }
  r.set("constant", r.constant);
  r.pass = std::isfinite(r.constant) && r.constant > 0.0;
  return r;
}

std::vector<NodeSet> centred_balls(const MetricMeasureGraph& graph, std::span<const double> fractions)
{
  const Eigen::VectorXd s = coordinate(graph);
  Eigen::Vector2d centre = graph.positions().colwise().mean().transpose();
  if (graph.descriptor().kind == SpaceKind::circle || graph.descriptor().kind == SpaceKind::interval)
    centre = {0.5, 0.0};
  Eigen::Index c = 0;
  (graph.positions().rowwise() - centre.transpose()).rowwise().squaredNorm().minCoeff(&c);
  const int n = static_cast<int>(graph.node_count());
  std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n));
  for (int y = 0; y < n; ++y)
    order[static_cast<std::size_t>(y)] = {graph.distance(static_cast<int>(c), y), y};
  std::sort(order.begin(), order.end());
  const Eigen::VectorXd& mu = graph.measure();
  const double total = mu.sum();
  std::vector<NodeSet> out;
  for (double fraction : fractions) {
    NodeSet set;
    char name[32];
    std::snprintf(name, sizeof name, "ball_%g", fraction);
    set.id = name;
    double m = 0.0;
    std::size_t k = 0;
    while (k < order.size() && m < fraction * total * (1.0 - 1e-12)) {
      // Whole distance shells only, so every set is a closed ball.
      const double d = order[k].first;
      while (k < order.size() && order[k].first == d) {
        set.nodes.push_back(order[k].second);
        m += mu(order[k].second);
        ++k;
      }
    }
    std::sort(set.nodes.begin(), set.nodes.end());
    out.push_back(std::move(set));
  }
  return out;
}

InequalityReport isoperimetric_check(const MetricMeasureGraph& graph, double delta, std::span<const NodeSet> sets)
{
  check_delta(delta, "isoperimetric_check");
  const double d_H = graph.geometry().d_H;
  const double d_W = graph.geometry().d_W;
  if (!(d_H > delta * d_W + regime_eps))
    throw WrongRegime("isoperimetric_check: needs d_H > delta d_W");
  InequalityReport r = base_report("isoperimetric", graph, delta, 1.0);
  const int n = static_cast<int>(graph.node_count());
  const Eigen::VectorXd& mu = graph.measure();
  const double exponent = -(d_H + delta * d_W);
  bool any = false;
  for (const auto& set : sets) {
    if (set.nodes.empty() || set.nodes.size() >= static_cast<std::size_t>(n))
      continue;
    std::vector<bool> inside(static_cast<std::size_t>(n), false);
    for (int i : set.nodes)
      inside[static_cast<std::size_t>(i)] = true;
    std::vector<double> rows(set.nodes.size());
    parallel_for(set.nodes.size(), [&](std::size_t a) {
      const int x = set.nodes[a];
      std::vector<double> row;
      row.reserve(static_cast<std::size_t>(n) - set.nodes.size());
      for (int y = 0; y < n; ++y)
        if (!inside[static_cast<std::size_t>(y)])
          row.push_back(std::pow(graph.distance(x, y), exponent) * mu(y));
      rows[a] = pairwise_sum(row) * mu(x);
    });
    const double rhs = pairwise_sum(rows);
    const double lhs = std::pow(mass(mu, set.nodes), (d_H - delta * d_W) / d_H);
    r.set("lhs:" + set.id, lhs);
    r.set("rhs:" + set.id, rhs);
    r.set("ratio:" + set.id, lhs / rhs);
    if (!any || lhs / rhs > r.constant) {
      r.constant = lhs / rhs;
      r.lhs = lhs;
      r.rhs = rhs;
      r.note = set.id;
    }
    any = true;
  }
  if (!any)
    throw ConfigurationError("isoperimetric_check: no nonempty proper set");
  r.set("constant", r.constant);
  r.pass = std::isfinite(r.constant) && r.constant > 0.0;
  return r;
}

InequalityReport linfty_check(const MetricMeasureGraph& graph, double delta, std::span<const TestFunction> family)
{
  check_delta(delta, "linfty_check");
  const double d_H = graph.geometry().d_H;
  const double d_W = graph.geometry().d_W;
  if (!(std::abs(d_H - delta * d_W) < regime_eps))
    throw WrongRegime("linfty_check: needs d_H = delta d_W");
  InequalityReport r = base_report("linfty", graph, delta, 1.0);
  for (const auto& f : family) {
    if (is_constant(f.values))
      continue;
    const double osc = f.values.maxCoeff() - f.values.minCoeff();
    const double w = w_norm(graph, f.values, delta * d_W, 1.0);
    r.set("ratio:" + f.id, osc / w);
    if (osc / w > r.constant) {
      r.constant = osc / w;
      r.lhs = osc;
      r.rhs = w;
      r.note = f.id;
    }
  }
  r.set("constant", r.constant);
  r.pass = std::isfinite(r.constant) && r.constant > 0.0;
  return r;
}

InequalityReport lp_smoothing_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                    double delta, double p, const TestFunction& f,
                                    std::span<const double> t_grid, std::span<const double> s_grid,
                                    double tolerance)
{
  check_delta(delta, "lp_smoothing_check");
  if (!(p >= 2.0))
    throw DomainError("lp_smoothing_check: p must be at least 2");
  if (s_grid.empty() || t_grid.size() < 5)
    throw InvalidGrid("lp_smoothing_check: grids too short");
  InequalityReport r = base_report("lp_smoothing", graph, delta, p);
  r.window_lo = t_grid.front();
  r.window_hi = t_grid.back();
  r.tolerance = tolerance;
  r.note = f.id;
  const Eigen::VectorXd& mu = graph.measure();
  std::vector<Eigen::VectorXd> evolved(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    evolved[i] = semigroup(spec, delta, t_grid[i], f.values);

  std::vector<std::vector<double>> profile(s_grid.size(), std::vector<double>(t_grid.size()));
  parallel_for(s_grid.size(), [&](std::size_t si) {
    const KernelMatrix k = kernel_at(spec, delta, s_grid[si]);
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
      profile[si][ti] = std::pow(s_grid[si], -1.0 / p) * std::pow(besov_energy(k, mu, evolved[ti], p), 1.0 / p);
  });
  std::vector<double> norm(t_grid.size(), 0.0);
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
    for (std::size_t si = 0; si < s_grid.size(); ++si)
      norm[ti] = std::max(norm[ti], profile[si][ti]);

  const double fp = lp_norm(f.values, mu, p);
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti)
    r.constant = std::max(r.constant, std::pow(t_grid[ti], 1.0 / p) * norm[ti] / fp);
  r.lhs = norm.front();
  r.rhs = fp;
  SlopeFit fit = log_log_fit(t_grid, norm);
  const double density_small = lp_norm(evolved.front() - f.values, mu, p);
  const double density_large = lp_norm(evolved.back() - f.values, mu, p);
  r.set("slope", fit.slope);
  r.set("r_squared", fit.r_squared);
  r.set("density_smallest_t", density_small);
  r.set("density_largest_t", density_large);
  r.inconclusive = fit.r_squared < min_r_squared;
  r.pass = !r.inconclusive && fit.slope >= -1.0 / p - tolerance && density_small <= density_large &&
           std::isfinite(r.constant);
  return r;
}

Eigen::MatrixXd fractional_form_matrix(const SpectralDecomposition& spec, double delta)
{
  check_delta(delta, "fractional_form_matrix");
  const auto n = static_cast<Eigen::Index>(spec.node_count());
  Eigen::MatrixXd b = spec.measure.asDiagonal() * spec.eigenvectors;
  for (Eigen::Index k = 0; k < b.cols(); ++k)
    b.col(k) *= std::sqrt(std::pow(std::max(spec.eigenvalues(k), 0.0), delta));
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  q.selfadjointView<Eigen::Lower>().rankUpdate(b);
  return q.selfadjointView<Eigen::Lower>();
}

double fractional_form(const SpectralDecomposition& spec, double delta, const Eigen::VectorXd& f)
{
  const Eigen::VectorXd c = spec.coefficients(f);
  std::vector<double> terms(static_cast<std::size_t>(c.size()));
  for (Eigen::Index k = 0; k < c.size(); ++k)
    terms[static_cast<std::size_t>(k)] = std::pow(std::max(spec.eigenvalues(k), 0.0), delta) * c(k) * c(k);
  return pairwise_sum(terms);
}

namespace {

double pinned_minimum(const Eigen::MatrixXd& q, const MetricMeasureGraph& graph, std::span<const int> K)
{
  if (!graph.killed())
    throw ConfigurationError("capacity: degenerate capacity on a graph without boundary (not transient)");
  if (K.empty())
    return 0.0;
  const auto n = static_cast<int>(graph.node_count());
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (int k : K) {
    if (k < 0 || k >= n)
      throw ConfigurationError("capacity: node index out of range");
    if (graph.is_boundary(k))
      throw ConfigurationError("capacity: K touches the boundary");
    pinned[static_cast<std::size_t>(k)] = true;
  }
  std::vector<int> free;
  std::vector<int> fixed;
  for (int i : graph.active_nodes())
    (pinned[static_cast<std::size_t>(i)] ? fixed : free).push_back(i);

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  for (int i : fixed)
    f(i) = 1.0;
  if (!free.empty()) {
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < m; ++c)
        a(r, c) = q(free[static_cast<std::size_t>(r)], free[static_cast<std::size_t>(c)]);
      for (int k : fixed)
        rhs(r) -= q(free[static_cast<std::size_t>(r)], k);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
      throw InvariantViolation("capacity: form block is not positive definite");
    const Eigen::VectorXd x = llt.solve(rhs);
    for (Eigen::Index r = 0; r < m; ++r)
      f(free[static_cast<std::size_t>(r)]) = x(r);
  }
  return f.dot(q * f);
}

} // namespace

double capacity(const SpectralDecomposition& spec, const MetricMeasureGraph& graph, double delta,
                std::span<const int> K)
{
  if (K.empty())
    return 0.0;
  return pinned_minimum(fractional_form_matrix(spec, delta), graph, K);
}

double cap1(const SpectralDecomposition& spec, const MetricMeasureGraph& graph, double delta,
            std::span<const int> K)
{
  if (K.empty())
    return 0.0;
  Eigen::MatrixXd q = fractional_form_matrix(spec, delta);
  q.diagonal() += graph.measure();
  return pinned_minimum(q, graph, K);
}

std::vector<NodeSet> dyadic_sets(const MetricMeasureGraph& graph, int depth)
{
  if (graph.descriptor().kind != SpaceKind::interval)
    throw ConfigurationError("dyadic_sets: defined on the interval only");
  const Eigen::VectorXd s = coordinate(graph);
  std::vector<NodeSet> out;
  for (int j = 1; j <= depth; ++j) {
    const int parts = 1 << j;
    for (int k = 0; k < parts; ++k) {
      const double lo = static_cast<double>(k) / parts;
      const double hi = static_cast<double>(k + 1) / parts;
      NodeSet set;
      set.id = "dyadic_" + std::to_string(j) + "_" + std::to_string(k);
      for (int i : graph.active_nodes())
        if (s(i) >= lo && s(i) < hi)
          set.nodes.push_back(i);
      if (!set.nodes.empty())
        out.push_back(std::move(set));
    }
  }
  return out;
}

InequalityReport capacity_sobolev_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                        double delta, double kappa_cap, std::span<const NodeSet> sets,
                                        std::span<const TestFunction> family)
{
  const double d_H = graph.geometry().d_H;
  const double d_W = graph.geometry().d_W;
  if (!(delta > 0.0 && delta < std::min(1.0, d_H / d_W) - regime_eps))
    throw WrongRegime("capacity_sobolev_check: needs 0 < delta < min{1, d_H/d_W} (transience)");
  if (!graph.killed())
    throw ConfigurationError("capacity_sobolev_check: needs a graph with boundary");
  if (!(kappa_cap >= 1.0))
    throw DomainError("capacity_sobolev_check: kappa must be at least 1");
  InequalityReport r = base_report("capacity_sobolev", graph, delta, 2.0);
  r.set("kappa", kappa_cap);
  const Eigen::MatrixXd q = fractional_form_matrix(spec, delta);
  const Eigen::VectorXd& mu = graph.measure();
  double theta = 0.0;
  for (const auto& set : sets) {
    if (set.nodes.empty())
      continue;
    const double cap = pinned_minimum(q, graph, set.nodes);
    const double ratio = std::pow(mass(mu, set.nodes), 1.0 / kappa_cap) / cap;
    r.set("cap:" + set.id, cap);
    theta = std::max(theta, ratio);
  }
  double c = 0.0;
  for (const auto& f : family) {
    if (is_constant(f.values))
      continue;
    const double lhs = lp_norm(f.values, mu, 2.0 * kappa_cap);
    const double rhs = std::sqrt(f.values.dot(q * f.values));
    r.set("ratio:" + f.id, lhs / rhs);
    if (lhs / rhs > c) {
      c = lhs / rhs;
      r.lhs = lhs;
      r.rhs = rhs;
      r.note = f.id;
    }
  }
  r.constant = c;
  r.set("theta", theta);
  r.set("constant", c);
  r.pass = std::isfinite(theta) && theta > 0.0 && std::isfinite(c) && c > 0.0;
  return r;
}

InequalityReport bv_characterization_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                           double delta, std::span<const TestFunction> family,
                                           std::span<const double> t_grid, std::span<const double> radii)
{
  const double kappa = graph_kappa(graph, "bv_characterization_check");
  const double d_W = graph.geometry().d_W;
  if (!(delta > 1.0 - kappa / d_W + regime_eps && delta < 1.0))
    throw WrongRegime("bv_characterization_check: needs delta > 1 - kappa/d_W; below that "
                      "B^{1,1} is the fractional Sobolev space W^{delta d_W, 1}");
  const double alpha = (1.0 - kappa / d_W) / delta;
  InequalityReport r = base_report("bv_characterization", graph, delta, 1.0);
  r.window_lo = t_grid.front();
  r.window_hi = t_grid.back();
  r.set("alpha", alpha);
  const auto curves = energy_curves(spec, family, 1.0, delta, t_grid);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (is_constant(family[i].values))
      continue;
    const double b = besov_norm(curves[i], alpha).value;
    const double v = variation(graph, family[i].values, radii, kappa);
    r.set("ratio:" + family[i].id, b / v);
    lo = std::min(lo, b / v);
    hi = std::max(hi, b / v);
  }
  r.lhs = lo;
  r.rhs = hi;
  r.constant = hi / lo;
  r.set("ratio_min", lo);
  r.set("ratio_max", hi);
  r.pass = std::isfinite(hi) && lo > 0.0;
  return r;
}

InequalityReport equivalence_brackets(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                      double delta, double p, double alpha, std::span<const TestFunction> family,
                                      std::span<const double> t_grid, std::span<const double> radii)
{
  check_delta(delta, "equivalence_brackets");
  if (!(alpha > 0.0 && alpha <= 1.0 / p + 1e-12))
    throw DomainError("equivalence_brackets: needs 0 < alpha <= 1/p");
  const bool critical = std::abs(alpha - 1.0 / p) < 1e-12;
  const double d_W = graph.geometry().d_W;
  InequalityReport r = base_report("equivalence", graph, delta, p);
  r.window_lo = t_grid.front();
  r.window_hi = t_grid.back();
  r.set("alpha", alpha);
  const auto curves = energy_curves(spec, family, p, delta, t_grid);
  std::map<std::string, std::pair<double, double>> bracket;
  std::map<std::string, std::pair<double, double>> same_space_only;
  auto widen = [](auto& into, const std::string& name, double ratio) {
    auto [it, fresh] = into.try_emplace(name, ratio, ratio);
    if (!fresh) {
      it->second.first = std::min(it->second.first, ratio);
      it->second.second = std::max(it->second.second, ratio);
    }
  };
  auto add = [&](const std::string& name, double ratio) { widen(bracket, name, ratio); };
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& f = family[i].values;
    if (is_constant(f))
      continue;
    const double b = besov_norm(curves[i], alpha).value;
    if (critical) {
      add("w", b / w_norm(graph, f, delta * d_W / p, p));
      add("grigoryan_pp", b / grigoryan_norm(graph, f, delta * d_W / p, p, p, radii));
    } else {
      const double lambda = alpha * delta * d_W;
      add("ks_sup", b / ks_norm(graph, f, lambda, p, radii, KsMode::sup));
      widen(same_space_only, "ks_limsup", b / ks_norm(graph, f, lambda, p, radii, KsMode::limsup_smallest));
      add("grigoryan_pinf", b / grigoryan_norm(graph, f, lambda, p, inf, radii));
    }
  }
  r.lhs = inf;
  r.rhs = 0.0;
  bool finite = !bracket.empty();
  for (const auto& [name, range] : bracket) {
    r.set(name + "_min", range.first);
    r.set(name + "_max", range.second);
    r.lhs = std::min(r.lhs, range.first);
    r.rhs = std::max(r.rhs, range.second);
    finite = finite && std::isfinite(range.second) && range.first > 0.0;
  }
  for (const auto& [name, range] : same_space_only) {
    r.set(name + "_min", range.first);
    r.set(name + "_max", range.second);
  }
  r.constant = r.rhs / r.lhs;
  r.pass = finite;
  return r;
}

std::vector<std::string> equivalence_keys(double p, double alpha)
{
  if (std::abs(alpha - 1.0 / p) < 1e-12)
    return {"grigoryan_pp_max", "grigoryan_pp_min", "w_max", "w_min"};
  return {"grigoryan_pinf_max", "grigoryan_pinf_min", "ks_sup_max", "ks_sup_min"};
}

InequalityReport triviality_check(std::span<const Level> levels, double delta, double p, double offset,
                                  std::size_t count)
{
  if (levels.size() < 2)
    throw ConfigurationError("triviality_check: needs at least two levels");
  const double alpha = 1.0 / p + offset;
  InequalityReport r = base_report("triviality", *levels.back().graph, delta, p);
  r.set("alpha", alpha);
  std::map<std::string, std::vector<double>> series;
  std::vector<std::string> order;
  for (const Level& level : levels) {
    const auto family = canonical_family(*level.graph, *level.spec);
    const auto grid = resolved_time_grid(*level.graph, *level.spec, delta, count);
    const auto curves = energy_curves(*level.spec, family, p, delta, grid);
    for (std::size_t i = 0; i < family.size(); ++i) {
      if (is_constant(family[i].values))
        continue;
      const double value = besov_norm(curves[i], alpha).value;
      r.set(family[i].id + "@" + std::to_string(level.graph->descriptor().resolution), value);
      if (!series.contains(family[i].id))
        order.push_back(family[i].id);
      series[family[i].id].push_back(value);
    }
  }
  double min_growth = std::numeric_limits<double>::infinity();
  bool increasing = true;
  for (const auto& id : order) {
    const auto& v = series[id];
    if (v.size() != levels.size()) {
      increasing = false;
      continue;
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
      min_growth = std::min(min_growth, v[i] / v[i - 1]);
      increasing = increasing && v[i] > v[i - 1];
    }
  }
  r.set("min_growth_ratio", min_growth);
  r.constant = min_growth;
  r.lhs = series.empty() ? 0.0 : series[order.front()].back();
  r.pass = increasing && !order.empty();
  r.inconclusive = order.empty();
  return r;
}

InequalityReport brezis_check(std::span<const Level> levels, double delta, double p,
                              const std::function<Eigen::VectorXd(const MetricMeasureGraph&)>& make_f,
                              double min_growth)
{
  if (levels.size() < 2)
    throw ConfigurationError("brezis_check: needs at least two levels");
  InequalityReport r = base_report("brezis", *levels.back().graph, delta, p);
  r.tolerance = min_growth;
  std::vector<double> norms;
  for (const Level& level : levels) {
    const double lambda = delta * level.graph->geometry().d_W / p;
    norms.push_back(w_norm(*level.graph, make_f(*level.graph), lambda, p));
    r.set("w@" + std::to_string(level.graph->descriptor().resolution), norms.back());
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < norms.size(); ++i) {
    const double growth = norms[i] / norms[i - 1] - 1.0;
    r.set("growth_" + std::to_string(i), growth);
    worst = std::min(worst, growth);
  }
  r.lhs = norms.back();
  r.rhs = norms.front();
  r.constant = worst;
  r.pass = worst >= min_growth;
  return r;
}

InequalityReport capacity_structure_check(const SpectralDecomposition& spec, const MetricMeasureGraph& graph,
                                          double delta, std::span<const NodeSet> sets)
{
  check_delta(delta, "capacity_structure_check");
  InequalityReport r = base_report("capacity_structure", graph, delta, 2.0);
  const Eigen::MatrixXd q = fractional_form_matrix(spec, delta);
  std::vector<double> caps(sets.size());
  std::vector<std::vector<int>> sorted(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    sorted[i] = sets[i].nodes;
    std::sort(sorted[i].begin(), sorted[i].end());
    caps[i] = pinned_minimum(q, graph, sorted[i]);
    r.set("cap:" + sets[i].id, caps[i]);
  }
  constexpr double slack = 1e-10;
  int nested = 0, monotone_violations = 0, pairs = 0, subadditive_violations = 0;
  double worst_union = 0.0;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = 0; b < sets.size(); ++b) {
      if (a == b)
        continue;
      if (std::includes(sorted[b].begin(), sorted[b].end(), sorted[a].begin(), sorted[a].end())) {
        ++nested;
        if (caps[a] > caps[b] * (1.0 + slack))
          ++monotone_violations;
      }
      if (a < b) {
        std::vector<int> u;
        std::set_union(sorted[a].begin(), sorted[a].end(), sorted[b].begin(), sorted[b].end(),
                       std::back_inserter(u));
        const double cu = pinned_minimum(q, graph, u);
        ++pairs;
        const double bound = caps[a] + caps[b];
        worst_union = std::max(worst_union, cu / bound);
        if (cu > bound * (1.0 + slack))
          ++subadditive_violations;
      }
    }
  }
  r.set("nested_pairs", nested);
  r.set("monotone_violations", monotone_violations);
  r.set("union_pairs", pairs);
  r.set("subadditive_violations", subadditive_violations);
  r.constant = worst_union;
  r.tolerance = slack;
  r.pass = monotone_violations == 0 && subadditive_violations == 0 && !sets.empty();
  return r;
}

} // namespace subheat
