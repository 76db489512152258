#include "geodesic_atlas/distance_function.hpp"

#include "geodesic_atlas/geometry.hpp"

namespace geodesic_atlas {

AnalyticDistance::AnalyticDistance(ImmersedManifold manifold, ChartPoint origin, ValueFn value,
                                   GradientFn gradient)
    : manifold_(std::move(manifold)),
      origin_(std::move(origin)),
      value_(std::move(value)),
      gradient_(std::move(gradient)) {}

FieldSample AnalyticDistance::evaluate(const ChartPoint& q) const {
  const MetricData g = metric_inverse(manifold_, q);
  FieldSample s;
  s.phi = value_(q);
  s.grad_chart = gradient_(q);
  s.grad_intrinsic = g.g_inv * s.grad_chart;
  return s;
}

}  // namespace geodesic_atlas
