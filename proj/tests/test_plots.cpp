#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "transfuse/plots.hpp"
#include "transfuse/schema.hpp"

using namespace transfuse;

namespace {

std::size_t occurrences(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
  return n;
}

ModelCurves scenario_curves(const std::string& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd s(200), y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    y(i) = i % 3 == 0;
    s(i) = 1 / (1 + std::exp(-(2 * y(i) - 1 + z(rng))));
  }
  return {model, roc_curve(s, y), pr_curve(s, y), calibration_curve(s, y)};
}

std::vector<ModelCurves> aggregated(int n_scenarios) {
  std::vector<ModelCurves> out;
  for (const auto model : kModelRows) {
    std::vector<CurveSeries> roc, pr, cal;
    for (int k = 0; k < n_scenarios; ++k) {
      const auto c = scenario_curves(std::string(model), static_cast<std::uint64_t>(k * 10) + model.size());
      roc.push_back(c.roc);
      pr.push_back(c.pr);
      cal.push_back(c.calibration);
    }
    out.push_back({std::string(model), aggregate_curves(roc), aggregate_curves(pr), aggregate_curves(cal)});
  }
  return out;
}

}  // namespace

TEST(CurvePlots, DeterministicSvgWithOneLinePerModel) {
  const auto curves = aggregated(5);
  const std::string a = render_curves_svg(curves, CurveKind::ROC), b = render_curves_svg(aggregated(5), CurveKind::ROC);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_EQ(occurrences(a, "<polyline"), 6u);
  EXPECT_EQ(occurrences(a, "<polygon"), 6u);
  for (const auto model : kModelRows) EXPECT_NE(a.find(">" + std::string(model) + "<"), std::string::npos);
  EXPECT_NE(render_curves_svg(curves, CurveKind::ROC, BandStyle::ConfidenceInterval), a);
}

TEST(CurvePlots, SingleScenarioHasNoBand) {
  const std::string svg = render_curves_svg(aggregated(1), CurveKind::PR);
  EXPECT_EQ(occurrences(svg, "<polygon"), 0u);
  EXPECT_EQ(occurrences(svg, "<polyline"), 6u);
}

TEST(CurvePlots, PointsCsvHasGridRows) {
  std::ostringstream out;
  write_curve_points(out, aggregated(5), CurveKind::Calibration);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "model,x,mean,std,ci_low,ci_high");
  std::map<std::string, int> rows;
  while (std::getline(in, line)) rows[line.substr(0, line.find(','))]++;
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& [model, n] : rows) EXPECT_EQ(n, 101) << model;
}

TEST(CurvePlots, EmitWritesAllKinds) {
  const auto dir = std::filesystem::temp_directory_path() / "transfuse_plots";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto files = emit_curve_plots(aggregated(2), dir);
  EXPECT_EQ(files.size(), 6u);
  for (const char* name : {"roc.svg", "roc.csv", "pr.svg", "pr.csv", "calibration.svg", "calibration.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  std::filesystem::remove_all(dir);
}

TEST(Boxplot, HemoglobinGroupsAndQuartiles) {
  std::vector<CohortInstance> inst;
  auto add = [&](int label, int event, double hgb) {
    CohortInstance c;
    c.features.fill(kMissing);
    c.label = label;
    c.event_index = event;
    c.features[kHemoglobin] = hgb;
    inst.push_back(c);
  };
  for (const double v : {10.0, 11.0, 12.0, 13.0, 30.0}) add(0, 0, v);
  add(1, 1, 7.0);
  add(1, 1, 8.0);
  add(1, 2, 100.0);  // later transfusions are left out
  add(1, 1, kMissing);
  const auto boxes = hemoglobin_boxes(inst);
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes[0].n, 5u);
  EXPECT_EQ(boxes[0].median, 12.0);
  EXPECT_EQ(boxes[0].q1, 11.0);
  EXPECT_EQ(boxes[0].q3, 13.0);
  EXPECT_EQ(boxes[0].whisker_low, 10.0);
  EXPECT_EQ(boxes[0].whisker_high, 13.0);  // 30 is beyond 13 + 1.5 * 2
  EXPECT_EQ(boxes[1].n, 2u);
  EXPECT_EQ(boxes[1].median, 7.5);
  const std::string svg = render_boxplot_svg(boxes, "Hemoglobin (g/dL)");
  EXPECT_EQ(svg, render_boxplot_svg(hemoglobin_boxes(inst), "Hemoglobin (g/dL)"));
  EXPECT_NE(svg.find("Hemoglobin (g/dL)"), std::string::npos);
}
