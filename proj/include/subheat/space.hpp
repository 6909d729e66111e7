#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace subheat {

enum class SpaceKind { circle, interval, gasket, vicsek };
enum class BoundaryMode { reflecting, absorbing };
enum class Provenance { analytic, estimated, unset };

std::string to_string(SpaceKind kind);
std::string to_string(BoundaryMode mode);
std::string to_string(Provenance provenance);
SpaceKind parse_space_kind(const std::string& text);
BoundaryMode parse_boundary_mode(const std::string& text);
Provenance parse_provenance(const std::string& text);

/// Scaling exponents of the space: Hausdorff dimension d_H, walk dimension
/// d_W and, when known, the weak Bakry-Emery Hoelder exponent kappa.
struct GeometryParams
{
  double d_H = 0.0;
  double d_W = 0.0;
  std::optional<double> kappa;
  Provenance d_H_provenance = Provenance::unset;
  Provenance d_W_provenance = Provenance::unset;
  Provenance kappa_provenance = Provenance::unset;

  /// Throws InvariantViolation if d_W < 2 for analytic d_W or kappa is
  /// outside (0, d_W).
  void validate() const;

  bool operator==(const GeometryParams&) const = default;
};

/// Serializable recipe for a space: enough to rebuild it exactly.
struct SpaceDescriptor
{
  SpaceKind kind = SpaceKind::circle;
  int resolution = 0;  ///< node count n for circle/interval, level m for fractals
  BoundaryMode boundary = BoundaryMode::reflecting;
  GeometryParams geometry;

  bool operator==(const SpaceDescriptor&) const = default;
};

std::string descriptor_to_json(const SpaceDescriptor& descriptor);
SpaceDescriptor descriptor_from_json(const std::string& text);

struct Edge
{
  int i;
  int j;
  double conductance;
};

/// Discrete metric measure Dirichlet space (X, d, mu, E).
///
/// Immutable once built. The quadratic form is
///   E(f, f) = sum over edges c_ij (f_i - f_j)^2,
/// the generator L solves A phi = lambda M phi with A the form matrix and
/// M = diag(mu). Boundary nodes are absorbing: functions are clamped to
/// zero there, which yields the killed (sub-Markovian) form.
class MetricMeasureGraph
{
public:
  enum class Metric { periodic_arc, euclidean };

  MetricMeasureGraph(SpaceDescriptor descriptor,
                     Eigen::MatrixX2d positions,
                     Metric metric,
                     Eigen::VectorXd measure,
                     std::vector<Edge> edges,
                     std::vector<int> boundary,
                     double spacing,
                     double diameter);

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(measure_.size()); }
  const SpaceDescriptor& descriptor() const noexcept { return descriptor_; }
  const GeometryParams& geometry() const noexcept { return descriptor_.geometry; }
  const Eigen::MatrixX2d& positions() const noexcept { return positions_; }
  const Eigen::VectorXd& measure() const noexcept { return measure_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<int>& boundary() const noexcept { return boundary_; }
  bool is_boundary(int node) const { return is_boundary_[static_cast<std::size_t>(node)]; }
  bool killed() const noexcept { return !boundary_.empty(); }
  /// Indices of non-boundary nodes in ascending order.
  const std::vector<int>& active_nodes() const noexcept { return active_; }
  /// Lattice spacing h (smallest cell side).
  double spacing() const noexcept { return spacing_; }
  double diameter() const noexcept { return diameter_; }
  Metric metric_kind() const noexcept { return metric_; }

  double distance(int i, int j) const;
  Eigen::MatrixXd distance_matrix() const;
  double total_mass() const;

  /// Dense symmetric form matrix A (weighted graph Laplacian), all nodes.
  Eigen::MatrixXd form_matrix() const;
  Eigen::SparseMatrix<double> conductance_matrix() const;
  double quadratic_form(std::span<const double> f) const;

  /// Copy with a new kappa value.
  MetricMeasureGraph with_kappa(double kappa, Provenance provenance) const;

private:
  SpaceDescriptor descriptor_;
  Eigen::MatrixX2d positions_;
  Metric metric_;
  Eigen::VectorXd measure_;
  std::vector<Edge> edges_;
  std::vector<int> boundary_;
  std::vector<bool> is_boundary_;
  std::vector<int> active_;
  double spacing_;
  double diameter_;
};

MetricMeasureGraph build_circle(int n);
MetricMeasureGraph build_interval(int n, BoundaryMode mode);
MetricMeasureGraph build_gasket(int level);
MetricMeasureGraph build_vicsek(int level);
MetricMeasureGraph build_space(const SpaceDescriptor& descriptor);

/// B(x, r) = { y : d(x, y) < r }, ascending indices.
std::vector<int> ball(const MetricMeasureGraph& graph, int center, double r);

/// mu(B(x, r)) for every node x and every radius of `radii`, row = node.
Eigen::MatrixXd ball_masses(const MetricMeasureGraph& graph, std::span<const double> radii);

struct AhlforsFit
{
  double d_H = 0.0;  ///< node-averaged log-log slope
  double c1 = 0.0;   ///< min over (x, r) of mu(B(x,r)) / r^d_H
  double c2 = 0.0;   ///< max over (x, r) of mu(B(x,r)) / r^d_H
  std::vector<double> radii;
};

/// Radii on [4 h, diameter / 4], log-spaced.
std::vector<double> default_radius_grid(const MetricMeasureGraph& graph, std::size_t count = 10);

AhlforsFit ahlfors_fit(const MetricMeasureGraph& graph, std::span<const double> radii);

} // namespace subheat
