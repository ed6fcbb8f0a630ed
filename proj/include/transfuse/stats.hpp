#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace transfuse::stats {

// Median of the values; even counts average the two middle elements.
double median(std::vector<double> values);

// Linear-interpolated quantile (type 7), q in [0, 1].
double quantile(std::vector<double> values, double q);

double pearson(std::span<const double> x, std::span<const double> y);

// Q(a, x) = Gamma(a, x) / Gamma(a).
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

// Pearson chi-square test of independence on an r x c contingency table,
// without continuity correction. Empty rows/columns are ignored.
TestResult chi_square_independence(const Eigen::MatrixXd& table);

// Kruskal-Wallis H with tie correction; p from chi-square with k-1 dof.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

}  // namespace transfuse::stats
