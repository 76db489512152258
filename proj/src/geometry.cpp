#include "geodesic_atlas/geometry.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "geodesic_atlas/errors.hpp"

namespace geodesic_atlas {

namespace {

constexpr double kSingularDet = 1e-14;

std::string describe(const ChartPoint& q) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < q.dim(); ++i) os << (i ? ", " : "") << q[i];
  os << ")";
  return os.str();
}

ChartMatrix invert(const ChartMatrix& g) {
  const double det = g.determinant();
  if (!(det >= kSingularDet)) {
    std::ostringstream os;
    os << "metric determinant " << det << " below " << kSingularDet;
    throw SingularMetricError(os.str());
  }
  return g.inverse();
}

}  // namespace

ChartVector ChristoffelSymbols::contract(const ChartVector& v, const ChartVector& w) const {
  ChartVector out = ChartVector::Zero(dim_);
  for (int k = 0; k < dim_; ++k) {
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) acc += (*this)(k, i, j) * v[i] * w[j];
    out[k] = acc;
  }
  return out;
}

void require_in_domain(const ImmersedManifold& m, const ChartPoint& q) {
  if (q.dim() != m.intrinsic_dim()) {
    throw DimensionError("chart point has dimension " + std::to_string(q.dim()) +
                         ", manifold expects " + std::to_string(m.intrinsic_dim()));
  }
  if (!q.is_finite()) throw NonFiniteError("chart point " + describe(q) + " is not finite");
  if (!m.domain().contains(q)) {
    throw DomainError("chart point " + describe(q) + " lies outside the domain of " + m.name());
  }
}

ImmersionJet immersion_jet(const ImmersedManifold& m, const ChartPoint& q, bool with_hessians) {
  require_in_domain(m, q);
  const int d = m.intrinsic_dim();
  const int n = m.ambient_dim();
  std::array<Dual2, kMaxDim> in;
  for (int i = 0; i < d; ++i) in[static_cast<std::size_t>(i)] = Dual2::variable(q[i], i, d);
  std::vector<Dual2> out(static_cast<std::size_t>(n));
  m.apply(std::span<const Dual2>(in.data(), static_cast<std::size_t>(d)), out);

  ImmersionJet jet;
  jet.position.resize(n);
  jet.jacobian.resize(n, d);
  if (with_hessians) jet.hessians.assign(static_cast<std::size_t>(n), ChartMatrix::Zero(d, d));
  for (int a = 0; a < n; ++a) {
    const Dual2& x = out[static_cast<std::size_t>(a)];
    jet.position[a] = x.value();
    for (int j = 0; j < d; ++j) jet.jacobian(a, j) = x.d(j);
    if (with_hessians) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) jet.hessians[static_cast<std::size_t>(a)](i, j) = x.dd(i, j);
    }
  }
  if (!jet.position.allFinite() || !jet.jacobian.allFinite()) {
    throw NonFiniteError("immersion of " + m.name() + " is not finite at " + describe(q));
  }
  return jet;
}

Eigen::VectorXd immerse(const ImmersedManifold& m, const ChartPoint& q) {
  return immersion_jet(m, q, false).position;
}

Eigen::MatrixXd jacobian(const ImmersedManifold& m, const ChartPoint& q) {
  return immersion_jet(m, q, false).jacobian;
}

MetricData metric(const ImmersedManifold& m, const ChartPoint& q) {
  const Eigen::MatrixXd j = jacobian(m, q);
  MetricData out;
  out.g = j.transpose() * j;
  if (!(out.g.determinant() >= kSingularDet)) {
    throw SingularMetricError("metric of " + m.name() + " is singular at " + describe(q));
  }
  return out;
}

MetricData metric_inverse(const ImmersedManifold& m, const ChartPoint& q) {
  MetricData out = metric(m, q);
  out.g_inv = invert(out.g);
  return out;
}

double inner_product(const MetricData& g, const TangentVector& v, const TangentVector& w) {
  const auto d = g.g.rows();
  if (v.components.size() != d || w.components.size() != d) {
    throw DimensionError("tangent vector dimension does not match metric");
  }
  if (v.base.dim() != w.base.dim() || v.base.coords != w.base.coords) {
    throw DimensionError("tangent vectors are based at different points");
  }
  return v.components.dot(g.g * w.components);
}

MetricData christoffel(const ImmersedManifold& m, const ChartPoint& q) {
  const ImmersionJet jet = immersion_jet(m, q, true);
  const int d = m.intrinsic_dim();
  const int n = m.ambient_dim();

  MetricData out;
  out.g = jet.jacobian.transpose() * jet.jacobian;
  out.g_inv = invert(out.g);

  // dg[k](i, j) = ∂_k g_ij = Σ_a H^a_{ki} J_{aj} + J_{ai} H^a_{kj}
  std::array<ChartMatrix, kMaxDim> dg;
  for (int k = 0; k < d; ++k) {
    ChartMatrix acc = ChartMatrix::Zero(d, d);
    for (int a = 0; a < n; ++a) {
      const ChartMatrix& h = jet.hessians[static_cast<std::size_t>(a)];
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          acc(i, j) += h(k, i) * jet.jacobian(a, j) + jet.jacobian(a, i) * h(k, j);
    }
    dg[static_cast<std::size_t>(k)] = acc;
  }

  // Compute the i <= j half and mirror so the lower-index symmetry is exact.
  out.christoffel = ChristoffelSymbols(d);
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        double acc = 0.0;
        for (int l = 0; l < d; ++l) {
          const double first_kind = dg[static_cast<std::size_t>(i)](j, l) +
                                    dg[static_cast<std::size_t>(j)](i, l) -
                                    dg[static_cast<std::size_t>(l)](i, j);
          acc += out.g_inv(k, l) * first_kind;
        }
        out.christoffel(k, i, j) = 0.5 * acc;
        out.christoffel(k, j, i) = 0.5 * acc;
      }
    }
  }
  return out;
}

double ricci_scalar(const ImmersedManifold& m, const ChartPoint& q) {
  require_in_domain(m, q);
  const int d = m.intrinsic_dim();
  const MetricData centre = christoffel(m, q);
  const ChristoffelSymbols& gamma = centre.christoffel;

  // dgamma[i] holds ∂_i Γ.
  std::vector<ChristoffelSymbols> dgamma;
  dgamma.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    ChartPoint plus = q, minus = q;
    plus[i] += kRicciFdStep;
    minus[i] -= kRicciFdStep;
    if (!m.domain().contains(plus) || !m.domain().contains(minus)) {
      throw DomainError("curvature stencil at " + describe(q) + " leaves the domain of " + m.name());
    }
    const ChristoffelSymbols gp = christoffel(m, plus).christoffel;
    const ChristoffelSymbols gm = christoffel(m, minus).christoffel;
    ChristoffelSymbols diff(d);
    for (int k = 0; k < d; ++k)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) diff(k, a, b) = (gp(k, a, b) - gm(k, a, b)) / (2.0 * kRicciFdStep);
    dgamma.push_back(std::move(diff));
  }

  // R^l_{ijk} = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik,
  // Ricci R_jk = R^l_{ljk}, scalar R = g^{jk} R_jk.
  double scalar = 0.0;
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) {
      double ricci_jk = 0.0;
      for (int l = 0; l < d; ++l) {
        double r = dgamma[static_cast<std::size_t>(l)](l, j, k) - dgamma[static_cast<std::size_t>(j)](l, l, k);
        for (int mm = 0; mm < d; ++mm) {
          r += gamma(l, l, mm) * gamma(mm, j, k) - gamma(l, j, mm) * gamma(mm, l, k);
        }
        ricci_jk += r;
      }
      scalar += centre.g_inv(j, k) * ricci_jk;
    }
  }
  if (!std::isfinite(scalar)) throw NonFiniteError("Ricci scalar is not finite at " + describe(q));
  return scalar;
}

double validate_immersion(const ImmersedManifold& m, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double smallest = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const ChartPoint q = m.domain().sample_uniform(rng);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian(m, q));
    const double sv = svd.singularValues().minCoeff();
    if (!(sv > 1e-10)) {
      throw SingularMetricError("immersion " + m.name() + " loses rank at " + describe(q));
    }
    smallest = std::min(smallest, sv);
  }
  return smallest;
}

}  // namespace geodesic_atlas
