#pragma once

#include <functional>
#include <vector>

namespace geodesic_atlas {

/// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

double median(std::vector<double> values);

/// Ranks starting at 1, ties sharing their average rank.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Spearman rank correlation (Pearson correlation of average ranks).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// sup |F_n(x) − F(x)| for the empirical CDF of `samples`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Upper-tail p-value of Pearson's χ² test of equal expected counts.
double chi_square_uniform_pvalue(const std::vector<long>& counts);

}  // namespace geodesic_atlas
