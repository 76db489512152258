#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "geodesic_atlas/manifold.hpp"

namespace geodesic_atlas {

/// Γ^k_{ij} stored densely as [k][i][j].
class ChristoffelSymbols {
 public:
  ChristoffelSymbols() = default;
  explicit ChristoffelSymbols(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim * dim * dim), 0.0) {}

  int dim() const { return dim_; }
  bool empty() const { return data_.empty(); }
  double operator()(int k, int i, int j) const { return data_[index(k, i, j)]; }
  double& operator()(int k, int i, int j) { return data_[index(k, i, j)]; }

  /// Γ^k_{ij} v^i w^j for each k.
  ChartVector contract(const ChartVector& v, const ChartVector& w) const;

 private:
  std::size_t index(int k, int i, int j) const {
    return static_cast<std::size_t>((k * dim_ + i) * dim_ + j);
  }

  int dim_ = 0;
  std::vector<double> data_;
};

/// Metric, inverse metric and connection at a point. `metric()` fills only
/// `g`; `metric_inverse()` adds `g_inv`; `christoffel()` fills everything.
struct MetricData {
  ChartMatrix g;
  ChartMatrix g_inv;
  ChristoffelSymbols christoffel;
};

/// ι together with its first and (optionally) second derivatives at a point.
struct ImmersionJet {
  Eigen::VectorXd position;           // ι(q), N entries
  Eigen::MatrixXd jacobian;           // N×D
  std::vector<ChartMatrix> hessians;  // N entries of D×D, empty unless requested
};

/// Throws DomainError when q lies outside the domain (1e-12 slack on bounds).
void require_in_domain(const ImmersedManifold& m, const ChartPoint& q);

ImmersionJet immersion_jet(const ImmersedManifold& m, const ChartPoint& q, bool with_hessians);

Eigen::VectorXd immerse(const ImmersedManifold& m, const ChartPoint& q);
Eigen::MatrixXd jacobian(const ImmersedManifold& m, const ChartPoint& q);

/// Induced metric g = JᵀJ (Euclidean ambient space).
MetricData metric(const ImmersedManifold& m, const ChartPoint& q);
MetricData metric_inverse(const ImmersedManifold& m, const ChartPoint& q);

double inner_product(const MetricData& g, const TangentVector& v, const TangentVector& w);

/// Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}) with ∂g taken
/// exactly from second-order dual numbers through ι.
MetricData christoffel(const ImmersedManifold& m, const ChartPoint& q);

/// Step used for the central differences of Γ inside ricci_scalar.
inline constexpr double kRicciFdStep = 1e-4;

/// Scalar curvature R = g^{jk} R^i_{ijk}; ∂Γ by central differences.
double ricci_scalar(const ImmersedManifold& m, const ChartPoint& q);

/// Smallest singular value of the Jacobian over `samples` uniform points;
/// throws SingularMetricError when it drops to 1e-10 or below.
double validate_immersion(const ImmersedManifold& m, int samples = 256, std::uint64_t seed = 0);

}  // namespace geodesic_atlas
