#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace transfuse {

struct MetricsRow {
  std::string model;
  double auroc = 0.0;  // NaN when the labels hold a single class
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool no_positive_predictions = false;  // precision reported as 0
};

enum class CurveKind { ROC, PR, Calibration };
std::string_view curve_kind_name(CurveKind k);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

// Cross-scenario band on a common grid.
struct CurveBand {
  std::vector<double> mean;
  std::vector<double> std;      // population standard deviation across series
  std::vector<double> ci_low;   // mean - 1.96 std / sqrt(k)
  std::vector<double> ci_high;
  std::size_t n_series = 0;
};

struct CurveSeries {
  CurveKind kind = CurveKind::ROC;
  std::vector<CurvePoint> points;
  std::optional<CurveBand> band;
};

inline constexpr std::size_t kCurveGridSize = 101;

// Swept over all distinct thresholds, highest first, from (0,0) to (1,1).
// Throws ValidationError unless both classes are present.
CurveSeries roc_curve(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

// (recall, precision) per distinct threshold, preceded by (0, 1).
CurveSeries pr_curve(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

// Equal-width bins on [0, 1]; (mean score, positive fraction) per non-empty bin.
CurveSeries calibration_curve(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels, int n_bins = 10);

// Trapezoidal area under the ROC curve returned by roc_curve.
double auroc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

double trapezoid_area(const std::vector<CurvePoint>& points);

MetricsRow compute_metrics(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels, double threshold = 0.5,
                           std::string model = {});

// Linear interpolation at x; with repeated x knots the last one wins.
double interpolate(const std::vector<CurvePoint>& points, double x);

// Resamples every series onto an evenly spaced grid of `grid_size` points on
// [0, 1] and attaches mean/std bands. Throws on mixed kinds or empty input.
CurveSeries aggregate_curves(const std::vector<CurveSeries>& series, std::size_t grid_size = kCurveGridSize);

}  // namespace transfuse
