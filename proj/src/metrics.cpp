#include "transfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "transfuse/errors.hpp"

namespace transfuse {

std::string_view curve_kind_name(CurveKind k) {
  switch (k) {
    case CurveKind::ROC:
      return "roc";
    case CurveKind::PR:
      return "pr";
    case CurveKind::Calibration:
      return "calibration";
  }
  return "unknown";
}

namespace {

struct Sweep {
  std::vector<double> tp, fp;  // cumulative counts after each distinct threshold
  double positives = 0.0;
  double negatives = 0.0;
};

Sweep sweep(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  Sweep s;
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels(order[i]) > 0.5) {
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    if (i + 1 == order.size() || scores(order[i + 1]) != scores(order[i])) {
      s.tp.push_back(tp);
      s.fp.push_back(fp);
    }
  }
  s.positives = tp;
  s.negatives = fp;
  if (s.positives == 0.0 || s.negatives == 0.0) throw ValidationError("curve requires both classes");
  return s;
}

}  // namespace

CurveSeries roc_curve(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const Sweep s = sweep(scores, labels);
  CurveSeries c;
  c.kind = CurveKind::ROC;
  c.points.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < s.tp.size(); ++i) c.points.push_back({s.fp[i] / s.negatives, s.tp[i] / s.positives});
  return c;
}

CurveSeries pr_curve(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const Sweep s = sweep(scores, labels);
  CurveSeries c;
  c.kind = CurveKind::PR;
  c.points.push_back({0.0, 1.0});
  for (std::size_t i = 0; i < s.tp.size(); ++i) {
    c.points.push_back({s.tp[i] / s.positives, s.tp[i] / (s.tp[i] + s.fp[i])});
  }
  return c;
}

CurveSeries calibration_curve(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels, int n_bins) {
  if (n_bins < 2) throw ValidationError("calibration needs at least two bins");
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  std::vector<double> sum(static_cast<std::size_t>(n_bins), 0.0), pos(sum), count(sum);
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores(i), 0.0, 1.0);
    const auto b = std::min(static_cast<std::size_t>(s * n_bins), static_cast<std::size_t>(n_bins - 1));
    sum[b] += scores(i);
    pos[b] += labels(i) > 0.5 ? 1.0 : 0.0;
    count[b] += 1.0;
  }
  CurveSeries c;
  c.kind = CurveKind::Calibration;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] > 0.0) c.points.push_back({sum[b] / count[b], pos[b] / count[b]});
  }
  return c;
}

double trapezoid_area(const std::vector<CurvePoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].x - points[i - 1].x) * (points[i].y + points[i - 1].y) * 0.5;
  }
  return area;
}

double auroc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  return trapezoid_area(roc_curve(scores, labels).points);
}

MetricsRow compute_metrics(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels, double threshold,
                           std::string model) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  if (scores.size() == 0) throw ValidationError("metrics on empty input");
  MetricsRow m;
  m.model = std::move(model);
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool pred = scores(i) >= threshold;
    const bool truth = labels(i) > 0.5;
    if (pred && truth) tp += 1;
    if (pred && !truth) fp += 1;
    if (!pred && !truth) tn += 1;
    if (!pred && truth) fn += 1;
  }
  m.accuracy = (tp + tn) / static_cast<double>(scores.size());
  m.no_positive_predictions = tp + fp == 0.0;
  m.precision = m.no_positive_predictions ? 0.0 : tp / (tp + fp);
  m.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.auroc = (tp + fn > 0.0 && fp + tn > 0.0) ? auroc(scores, labels) : std::nan("");
  return m;
}

double interpolate(const std::vector<CurvePoint>& points, double x) {
  if (points.empty()) throw ValidationError("interpolate on empty curve");
  if (x <= points.front().x) {
    // Take the last knot sharing the first x.
    std::size_t i = 0;
    while (i + 1 < points.size() && points[i + 1].x == points.front().x) ++i;
    return x < points.front().x ? points.front().y : points[i].y;
  }
  if (x >= points.back().x) return points.back().y;
  // Last segment [p_j, p_{j+1}] with p_j.x <= x <= p_{j+1}.x.
  std::size_t j = 0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i].x <= x && x <= points[i + 1].x) j = i;
  }
  const auto& a = points[j];
  const auto& b = points[j + 1];
  if (b.x == a.x) return b.y;
  if (x == b.x) {
    std::size_t k = j + 1;
    while (k + 1 < points.size() && points[k + 1].x == b.x) ++k;
    return points[k].y;
  }
  return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
}

CurveSeries aggregate_curves(const std::vector<CurveSeries>& series, std::size_t grid_size) {
  if (series.empty()) throw ValidationError("aggregate_curves needs at least one series");
  if (grid_size < 2) throw ValidationError("grid needs at least two points");
  for (const auto& s : series) {
    if (s.kind != series.front().kind) throw ValidationError("cannot aggregate curves of mixed kinds");
  }
  CurveSeries out;
  out.kind = series.front().kind;
  CurveBand band;
  band.n_series = series.size();
  const double k = static_cast<double>(series.size());
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(grid_size - 1);
    std::vector<double> ys;
    for (const auto& s : series) ys.push_back(interpolate(s.points, x));
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
    double var = 0.0;
    for (const double y : ys) var += (y - mean) * (y - mean);
    const double sd = std::sqrt(var / k);
    out.points.push_back({x, mean});
    band.mean.push_back(mean);
    band.std.push_back(sd);
    band.ci_low.push_back(mean - 1.96 * sd / std::sqrt(k));
    band.ci_high.push_back(mean + 1.96 * sd / std::sqrt(k));
  }
  out.band = std::move(band);
  return out;
}

}  // namespace transfuse
