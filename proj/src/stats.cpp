#include "transfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "transfuse/errors.hpp"

namespace transfuse::stats {

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("pearson needs two equal-length samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

namespace {

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw ValidationError("regularized_gamma_q domain error");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * dof, 0.5 * statistic);
}

TestResult chi_square_independence(const Eigen::MatrixXd& table) {
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    if (table.row(r).sum() > 0.0) rows.push_back(r);
  }
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    if (table.col(c).sum() > 0.0) cols.push_back(c);
  }
  if (rows.size() < 2 || cols.size() < 2) throw ValidationError("chi-square needs at least a 2x2 table");
  const Eigen::MatrixXd t = table(rows, cols);
  const Eigen::VectorXd row_sums = t.rowwise().sum();
  const Eigen::RowVectorXd col_sums = t.colwise().sum();
  const double total = t.sum();
  TestResult out;
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      const double expected = row_sums(r) * col_sums(c) / total;
      const double diff = t(r, c) - expected;
      out.statistic += diff * diff / expected;
    }
  }
  out.dof = static_cast<double>((t.rows() - 1) * (t.cols() - 1));
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  struct Item {
    double value;
    std::size_t group;
  };
  std::vector<Item> items;
  std::size_t non_empty = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].empty()) ++non_empty;
    for (double v : groups[g]) items.push_back({v, g});
  }
  if (non_empty < 2) throw ValidationError("kruskal-wallis needs two non-empty groups");
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

  const double n = static_cast<double>(items.size());
  std::vector<double> rank_sums(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) rank_sums[items[k].group] += avg_rank;
    i = j;
  }

  double h = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) continue;
    h += rank_sums[g] * rank_sums[g] / static_cast<double>(groups[g].size());
  }
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
  const double correction = 1.0 - tie_term / (n * n * n - n);
  TestResult out;
  out.dof = static_cast<double>(non_empty - 1);
  out.statistic = correction > 0.0 ? std::max(0.0, h / correction) : 0.0;
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

}  // namespace transfuse::stats
