#pragma once

#include <functional>

#include "geodesic_atlas/manifold.hpp"

namespace geodesic_atlas {

/// φ together with its chart gradient φ_{,i} and intrinsic gradient g^{ij}φ_{,j}.
struct FieldSample {
  double phi = 0.0;
  ChartVector grad_chart;
  ChartVector grad_intrinsic;
};

/// A distance function φ(·; p) on a manifold with fixed origin p.
class DistanceFunction {
 public:
  virtual ~DistanceFunction() = default;

  virtual const ImmersedManifold& manifold() const = 0;
  virtual const ChartPoint& origin() const = 0;
  virtual FieldSample evaluate(const ChartPoint& q) const = 0;

  double phi(const ChartPoint& q) const { return evaluate(q).phi; }
};

/// Closed-form distance function supplied as φ and its chart gradient.
class AnalyticDistance final : public DistanceFunction {
 public:
  using ValueFn = std::function<double(const ChartPoint&)>;
  using GradientFn = std::function<ChartVector(const ChartPoint&)>;

  AnalyticDistance(ImmersedManifold manifold, ChartPoint origin, ValueFn value, GradientFn gradient);

  const ImmersedManifold& manifold() const override { return manifold_; }
  const ChartPoint& origin() const override { return origin_; }
  FieldSample evaluate(const ChartPoint& q) const override;

 private:
  ImmersedManifold manifold_;
  ChartPoint origin_;
  ValueFn value_;
  GradientFn gradient_;
};

}  // namespace geodesic_atlas
