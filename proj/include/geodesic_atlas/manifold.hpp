#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "geodesic_atlas/dual.hpp"

namespace geodesic_atlas {

/// Chart-space vector of at most kMaxDim entries (no heap allocation).
using ChartVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using ChartMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Intrinsic coordinates of a point in a manifold's parameter domain.
struct ChartPoint {
  ChartVector coords;

  ChartPoint() = default;
  explicit ChartPoint(ChartVector c) : coords(std::move(c)) {}
  ChartPoint(std::initializer_list<double> values);

  int dim() const { return static_cast<int>(coords.size()); }
  double operator[](int i) const { return coords[i]; }
  double& operator[](int i) { return coords[i]; }
  bool is_finite() const { return coords.allFinite(); }
};

/// Contravariant tangent vector v^i based at a chart point.
struct TangentVector {
  ChartPoint base;
  ChartVector components;

  int dim() const { return static_cast<int>(components.size()); }
};

/// Rectangular chart domain. Periodic coordinates wrap into [lo, hi).
class Domain {
 public:
  Domain() = default;
  Domain(ChartVector lo, ChartVector hi);

  int dim() const { return static_cast<int>(lo_.size()); }
  const ChartVector& lo() const { return lo_; }
  const ChartVector& hi() const { return hi_; }
  double width(int i) const { return hi_[i] - lo_[i]; }
  ChartVector centre() const { return 0.5 * (lo_ + hi_); }

  Domain& set_periodic(int i, bool periodic = true);
  bool periodic(int i) const { return periodic_[static_cast<std::size_t>(i)]; }

  /// True when every bounded coordinate lies within [lo - tol, hi + tol].
  bool contains(const ChartPoint& q, double tol = 1e-12) const;

  /// Maps periodic coordinates into [lo, hi); bounded coordinates untouched.
  ChartPoint wrap(const ChartPoint& q) const;

  /// Displacement b - a, using the shortest representative on periodic axes.
  ChartVector displacement(const ChartPoint& a, const ChartPoint& b) const;

  /// Uniform draw over the rectangle.
  ChartPoint sample_uniform(std::mt19937_64& rng) const;

  double volume() const;

 private:
  ChartVector lo_;
  ChartVector hi_;
  std::array<bool, kMaxDim> periodic_{};
};

/// Smooth map from chart coordinates to ambient Euclidean coordinates,
/// evaluated on second-order dual numbers.
using ImmersionFn = std::function<void(std::span<const Dual2> q, std::span<Dual2> x)>;

/// An immersion ι: chart domain -> R^N with Euclidean ambient metric.
class ImmersedManifold {
 public:
  ImmersedManifold(std::string name, int intrinsic_dim, int ambient_dim, Domain domain,
                   ImmersionFn immersion, double scale = 1.0);

  const std::string& name() const { return name_; }
  int intrinsic_dim() const { return intrinsic_dim_; }
  int ambient_dim() const { return ambient_dim_; }
  const Domain& domain() const { return domain_; }
  double scale() const { return scale_; }

  /// Same immersion restricted to (or extended over) another rectangle.
  /// Periodic flags are taken from `domain`.
  ImmersedManifold with_domain(Domain domain) const;

  /// Evaluates ι on dual inputs. `x` must have ambient_dim() entries.
  void apply(std::span<const Dual2> q, std::span<Dual2> x) const { immersion_(q, x); }

 private:
  std::string name_;
  int intrinsic_dim_;
  int ambient_dim_;
  Domain domain_;
  ImmersionFn immersion_;
  double scale_;
};

/// Standard peaks surface height f(x, y).
template <typename T>
T peaks_height(const T& x, const T& y) {
  using std::exp;
  using std::pow;
  const T one_minus_x = 1.0 - x;
  return 3.0 * (one_minus_x * one_minus_x) * exp(-(x * x) - (y + 1.0) * (y + 1.0)) -
         10.0 * (x / 5.0 - pow(x, 3) - pow(y, 5)) * exp(-(x * x) - y * y) -
         (1.0 / 3.0) * exp(-(x + 1.0) * (x + 1.0) - y * y);
}

ImmersedManifold make_plane();
ImmersedManifold make_unit_sphere();
ImmersedManifold make_peaks(double scale = 1.0);

/// Built-in manifold by CLI name: "plane", "unit-sphere" or "peaks".
ImmersedManifold make_manifold(const std::string& name, double scale = 1.0);

}  // namespace geodesic_atlas
