#pragma once

// Ground truth independent of the learned field: grid-graph shortest paths,
// central finite differences and closed-form distance functions.

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "geodesic_atlas/distance_function.hpp"
#include "geodesic_atlas/manifold.hpp"

namespace geodesic_atlas {

/// Nodes per chart axis.
using GridResolution = std::array<int, 2>;

/// Dijkstra distances on a regular 8-connected grid spanning the chart
/// rectangle (periodic identification is ignored). Node (i, j) sits at
/// lo + (i/(nx − 1), j/(ny − 1)) ⊙ (hi − lo); storage is row-major in j.
class GridDistance {
 public:
  GridDistance(Domain domain, GridResolution resolution, int source, std::vector<double> distances);

  const GridResolution& resolution() const { return resolution_; }
  int source() const { return source_; }
  std::size_t size() const { return distances_.size(); }
  const std::vector<double>& distances() const { return distances_; }

  int index(int i, int j) const { return j * resolution_[0] + i; }
  ChartPoint node(int flat) const;
  int nearest_node(const ChartPoint& q) const;
  double at(int flat) const { return distances_[static_cast<std::size_t>(flat)]; }

  /// Distance at the grid node nearest to q.
  double nearest(const ChartPoint& q) const { return at(nearest_node(q)); }

  /// CSV rows `x,y,distance` (no header comment).
  void write_csv(std::ostream& os) const;

 private:
  Domain domain_;
  GridResolution resolution_;
  int source_;
  std::vector<double> distances_;
};

/// Edge weights are midpoint-metric segment lengths (as in curve_length).
GridDistance grid_distance(const ImmersedManifold& m, const ChartPoint& p, GridResolution resolution);
GridDistance grid_distance(const ImmersedManifold& m, const ChartPoint& p, int resolution);

/// Central differences per coordinate.
ChartVector finite_diff_grad(const std::function<double(const ChartVector&)>& f, const ChartVector& x,
                             double h);

/// φ = factor · |q − p| on the plane (factor = 1 is the exact distance).
AnalyticDistance plane_exact_distance(const ImmersedManifold& plane, const ChartPoint& p, double factor = 1.0);

/// Great-circle distance arccos(⟨ι(p), ι(q)⟩) on the unit sphere.
AnalyticDistance sphere_exact_distance(const ImmersedManifold& sphere, const ChartPoint& p);

}  // namespace geodesic_atlas
