#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "geodesic_atlas/manifold.hpp"

namespace geodesic_atlas {

/// Floor added to |R| before taking the log.
inline constexpr double kRicciFloor = 1e-6;

/// log(|R(q)| + kRicciFloor); −∞ outside the domain or where R cannot be evaluated.
double curvature_logdensity(const ImmersedManifold& m, const ChartPoint& q);

using LogDensity = std::function<double(const ChartPoint&)>;

struct ChainConfig {
  int n_chains = 5;
  int burn_in = 5000;
  int n_keep = 10000;
  double proposal_std = 0.3;
  std::uint64_t seed = 0;
  int thin = 1;  // keep every thin-th post-burn-in state

  void validate() const;

  static ChainConfig desk();
  static ChainConfig paper();
};

struct ChainResult {
  std::vector<ChartPoint> samples;
  long proposals = 0;
  long accepted = 0;

  double acceptance_rate() const {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

/// Random-walk Metropolis with isotropic Gaussian proposals, started at a
/// uniform draw from `domain`. Seeded with cfg.seed + chain_index.
ChainResult mh_chain(const LogDensity& logdensity, const Domain& domain, const ChainConfig& cfg, int chain_index);

/// All chains (concurrently, up to the thread budget), in chain order.
std::vector<ChainResult> run_chains(const LogDensity& logdensity, const Domain& domain, const ChainConfig& cfg);

/// Concatenation of the chains' samples in chain order.
std::vector<ChartPoint> pool(const std::vector<ChainResult>& chains);

/// Gaussian product-kernel density estimate.
double kde_pdf(const std::vector<ChartPoint>& samples, const ChartVector& bandwidth, const ChartPoint& x);

/// n^{−1/(D+4)} · σ̂ per coordinate (σ̂ the sample standard deviation).
ChartVector scott_bandwidth(const std::vector<ChartPoint>& samples);

/// Gaussian product-kernel KDE over a sample set. Once bound to a domain,
/// kernels are reflected at bounded edges and wrapped on periodic axes, so
/// the density vanishes outside the domain and integrates to 1 over it.
/// Only the nearest image on each side is kept, which assumes the bandwidth
/// is small next to the domain width.
class CurvatureKde {
 public:
  /// Bandwidth defaults to Scott's rule.
  explicit CurvatureKde(std::vector<ChartPoint> samples, std::optional<ChartVector> bandwidth = std::nullopt,
                        std::optional<Domain> domain = std::nullopt);

  const std::vector<ChartPoint>& samples() const { return samples_; }
  const ChartVector& bandwidth() const { return bandwidth_; }
  const std::optional<Domain>& domain() const { return domain_; }

  /// Copy of this estimate bound to `domain`.
  CurvatureKde bound_to(const Domain& domain) const;

  double pdf(const ChartPoint& x) const;

  /// A stored sample jittered by the kernel, folded into the domain when bound.
  ChartPoint draw(std::mt19937_64& rng) const;

 private:
  std::vector<ChartPoint> samples_;
  ChartVector bandwidth_;
  std::optional<Domain> domain_;
};

/// Bound KDE on an n × n node grid spanning a 2-D domain; entry (j, i) is
/// the density at lo + (i, j)/(n − 1) ⊙ (hi − lo).
Eigen::MatrixXd kde_grid(const CurvatureKde& kde, const Domain& domain, int n);

/// i.i.d. draws from mix_weight · KDE + (1 − mix_weight) · uniform(domain),
/// with the KDE bound to the domain so both branches stay inside it.
class MixtureSampler {
 public:
  MixtureSampler(const CurvatureKde& kde, Domain domain, double mix_weight = 0.5);

  ChartPoint operator()(std::mt19937_64& rng) const;

  /// mix_weight · kde().pdf(q) + (1 − mix_weight) / volume.
  double density(const ChartPoint& q) const;

  const CurvatureKde& kde() const { return kde_; }
  double mix_weight() const { return mix_weight_; }

 private:
  CurvatureKde kde_;
  Domain domain_;
  double mix_weight_;
};

/// CSV rows `chain,index,q1..qD` (no header comment).
void write_samples_csv(std::ostream& os, const std::vector<ChainResult>& chains);

/// CSV rows `x,y,density` from kde_grid (no header comment).
void write_kde_grid_csv(std::ostream& os, const CurvatureKde& kde, const Domain& domain, int n);

}  // namespace geodesic_atlas
