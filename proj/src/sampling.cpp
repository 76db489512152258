#include "geodesic_atlas/sampling.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/geometry.hpp"
#include "geodesic_atlas/parallel.hpp"

namespace geodesic_atlas {

double curvature_logdensity(const ImmersedManifold& m, const ChartPoint& q) {
  constexpr double kOutside = -std::numeric_limits<double>::infinity();
  if (q.dim() != m.intrinsic_dim() || !q.is_finite() || !m.domain().contains(q, 0.0)) return kOutside;
  try {
    return std::log(std::abs(ricci_scalar(m, q)) + kRicciFloor);
  } catch (const Error&) {
    return kOutside;
  }
}

void ChainConfig::validate() const {
  if (n_chains < 1 || burn_in < 0 || n_keep < 1 || thin < 1) {
    throw ConfigError("chain config needs n_chains >= 1, burn_in >= 0, n_keep >= 1, thin >= 1");
  }
  if (!(proposal_std > 0) || !std::isfinite(proposal_std)) throw ConfigError("proposal_std must be positive");
}

ChainConfig ChainConfig::desk() {
  ChainConfig cfg;
  cfg.thin = 10;
  return cfg;
}

ChainConfig ChainConfig::paper() {
  ChainConfig cfg = desk();
  cfg.burn_in = 50000;
  return cfg;
}

ChainResult mh_chain(const LogDensity& logdensity, const Domain& domain, const ChainConfig& cfg, int chain_index) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(chain_index));
  std::normal_distribution<double> step(0.0, cfg.proposal_std);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ChartPoint current = domain.sample_uniform(rng);
  double current_ld = logdensity(current);
  ChainResult out;
  out.samples.reserve(static_cast<std::size_t>(cfg.n_keep));
  const long total = cfg.burn_in + static_cast<long>(cfg.n_keep) * cfg.thin;
  for (long it = 0; it < total; ++it) {
    ChartPoint proposal = current;
    for (int i = 0; i < proposal.dim(); ++i) proposal[i] += step(rng);
    proposal = domain.wrap(proposal);
    const double ld = logdensity(proposal);
    const double u = unit(rng);
    ++out.proposals;
    if (ld != -std::numeric_limits<double>::infinity() && std::log(u) < ld - current_ld) {
      current = std::move(proposal);
      current_ld = ld;
      ++out.accepted;
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == cfg.thin - 1) out.samples.push_back(current);
  }
  return out;
}

std::vector<ChainResult> run_chains(const LogDensity& logdensity, const Domain& domain, const ChainConfig& cfg) {
  cfg.validate();
  std::vector<ChainResult> chains(static_cast<std::size_t>(cfg.n_chains));
  parallel_for(cfg.n_chains, [&](int c) { chains[static_cast<std::size_t>(c)] = mh_chain(logdensity, domain, cfg, c); });
  return chains;
}

std::vector<ChartPoint> pool(const std::vector<ChainResult>& chains) {
  std::vector<ChartPoint> all;
  for (const auto& c : chains) all.insert(all.end(), c.samples.begin(), c.samples.end());
  return all;
}

double kde_pdf(const std::vector<ChartPoint>& samples, const ChartVector& bandwidth, const ChartPoint& x) {
  if (samples.empty()) throw EmptySampleError("KDE needs at least one sample");
  const int d = x.dim();
  if (bandwidth.size() != d || samples.front().dim() != d) throw DimensionError("KDE dimension mismatch");
  if (!(bandwidth.array() > 0).all()) throw ConfigError("KDE bandwidth must be positive");
  const ChartVector inv = bandwidth.cwiseInverse();
  double sum = 0.0;
  for (const auto& s : samples) sum += std::exp(-0.5 * ((x.coords - s.coords).cwiseProduct(inv)).squaredNorm());
  const double norm = std::pow(2.0 * std::numbers::pi, 0.5 * d) * bandwidth.prod();
  return sum / (static_cast<double>(samples.size()) * norm);
}

ChartVector scott_bandwidth(const std::vector<ChartPoint>& samples) {
  if (samples.size() < 2) throw EmptySampleError("Scott's rule needs at least two samples");
  const int d = samples.front().dim();
  const double n = static_cast<double>(samples.size());
  ChartVector mean = ChartVector::Zero(d);
  for (const auto& s : samples) mean += s.coords;
  mean /= n;
  ChartVector var = ChartVector::Zero(d);
  for (const auto& s : samples) var += (s.coords - mean).cwiseAbs2();
  var /= n - 1;
  const ChartVector h = var.cwiseSqrt() * std::pow(n, -1.0 / (d + 4));
  if (!(h.array() > 0).all()) throw ConfigError("Scott's rule gives a zero bandwidth (degenerate samples)");
  return h;
}

namespace {

double gauss(double t) { return std::exp(-0.5 * t * t); }

// One-axis kernel at x for a sample at c, including the nearest images.
double axis_kernel(double x, double c, double h, const Domain& dom, int axis) {
  const double lo = dom.lo()[axis], hi = dom.hi()[axis];
  if (dom.periodic(axis)) {
    const double w = hi - lo;
    return gauss((x - c) / h) + gauss((x - c + w) / h) + gauss((x - c - w) / h);
  }
  return gauss((x - c) / h) + gauss((x - (2 * lo - c)) / h) + gauss((x - (2 * hi - c)) / h);
}

// Reflects bounded coordinates back into [lo, hi] and wraps periodic ones.
ChartPoint fold(const Domain& dom, ChartPoint q) {
  for (int i = 0; i < q.dim(); ++i) {
    if (dom.periodic(i)) continue;
    const double w = dom.width(i);
    double t = std::fmod(q[i] - dom.lo()[i], 2 * w);
    if (t < 0) t += 2 * w;
    if (t > w) t = 2 * w - t;
    q[i] = dom.lo()[i] + t;
  }
  return dom.wrap(q);
}

}  // namespace

CurvatureKde::CurvatureKde(std::vector<ChartPoint> samples, std::optional<ChartVector> bandwidth,
                           std::optional<Domain> domain)
    : samples_(std::move(samples)), domain_(std::move(domain)) {
  if (samples_.empty()) throw EmptySampleError("KDE needs at least one sample");
  bandwidth_ = bandwidth ? *bandwidth : scott_bandwidth(samples_);
  if (bandwidth_.size() != samples_.front().dim() || !(bandwidth_.array() > 0).all()) {
    throw ConfigError("KDE bandwidth must be positive with one entry per dimension");
  }
  if (domain_ && domain_->dim() != bandwidth_.size()) throw DimensionError("KDE domain dimension mismatch");
}

CurvatureKde CurvatureKde::bound_to(const Domain& domain) const {
  CurvatureKde out = *this;
  if (domain.dim() != bandwidth_.size()) throw DimensionError("KDE domain dimension mismatch");
  out.domain_ = domain;
  return out;
}

double CurvatureKde::pdf(const ChartPoint& x) const {
  if (!domain_) return kde_pdf(samples_, bandwidth_, x);
  const Domain& dom = *domain_;
  if (x.dim() != dom.dim()) throw DimensionError("KDE dimension mismatch");
  if (!dom.contains(x, 0.0)) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples_) {
    double k = 1.0;
    for (int i = 0; i < x.dim(); ++i) k *= axis_kernel(x[i], s[i], bandwidth_[i], dom, i);
    sum += k;
  }
  const double norm = std::pow(2.0 * std::numbers::pi, 0.5 * x.dim()) * bandwidth_.prod();
  return sum / (static_cast<double>(samples_.size()) * norm);
}

ChartPoint CurvatureKde::draw(std::mt19937_64& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
  std::normal_distribution<double> z(0.0, 1.0);
  ChartPoint q = samples_[pick(rng)];
  for (int i = 0; i < q.dim(); ++i) q[i] += bandwidth_[i] * z(rng);
  return domain_ ? fold(*domain_, std::move(q)) : q;
}

Eigen::MatrixXd kde_grid(const CurvatureKde& kde, const Domain& domain, int n) {
  if (domain.dim() != 2 || n < 2) throw DimensionError("KDE grid needs a 2-D domain and n >= 2");
  const auto& samples = kde.samples();
  const ChartVector& h = kde.bandwidth();
  if (h.size() != 2) throw DimensionError("KDE dimension mismatch");
  // The product kernel factorises per axis, so the grid is a product of two
  // (samples × n) kernel tables.
  Eigen::MatrixXd ax(static_cast<Eigen::Index>(samples.size()), n), ay(ax.rows(), n);
  for (int g = 0; g < n; ++g) {
    const double x = domain.lo()[0] + domain.width(0) * g / (n - 1);
    const double y = domain.lo()[1] + domain.width(1) * g / (n - 1);
    for (Eigen::Index k = 0; k < ax.rows(); ++k) {
      const ChartPoint& s = samples[static_cast<std::size_t>(k)];
      ax(k, g) = axis_kernel(x, s[0], h[0], domain, 0);
      ay(k, g) = axis_kernel(y, s[1], h[1], domain, 1);
    }
  }
  const double norm = 2.0 * std::numbers::pi * h.prod() * static_cast<double>(samples.size());
  return (ay.transpose() * ax) / norm;
}

MixtureSampler::MixtureSampler(const CurvatureKde& kde, Domain domain, double mix_weight)
    : kde_(kde.bound_to(domain)), domain_(std::move(domain)), mix_weight_(mix_weight) {
  if (!(mix_weight >= 0 && mix_weight <= 1)) throw ConfigError("mix_weight must lie in [0, 1]");
}

ChartPoint MixtureSampler::operator()(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < mix_weight_) return kde_.draw(rng);
  return domain_.sample_uniform(rng);
}

double MixtureSampler::density(const ChartPoint& q) const {
  return mix_weight_ * kde_.pdf(q) + (1.0 - mix_weight_) / domain_.volume();
}

void write_samples_csv(std::ostream& os, const std::vector<ChainResult>& chains) {
  const int d = chains.empty() || chains.front().samples.empty() ? 0 : chains.front().samples.front().dim();
  os << "chain,index";
  for (int i = 1; i <= d; ++i) os << ",q" << i;
  os << '\n';
  const auto precision = os.precision(15);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t k = 0; k < chains[c].samples.size(); ++k) {
      os << c << ',' << k;
      for (int i = 0; i < d; ++i) os << ',' << chains[c].samples[k][i];
      os << '\n';
    }
  }
  os.precision(precision);
}

void write_kde_grid_csv(std::ostream& os, const CurvatureKde& kde, const Domain& domain, int n) {
  const Eigen::MatrixXd grid = kde_grid(kde, domain, n);
  os << "x,y,density\n";
  const auto precision = os.precision(15);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      os << domain.lo()[0] + domain.width(0) * i / (n - 1) << ',' << domain.lo()[1] + domain.width(1) * j / (n - 1)
         << ',' << grid(j, i) << '\n';
    }
  }
  os.precision(precision);
}

}  // namespace geodesic_atlas
