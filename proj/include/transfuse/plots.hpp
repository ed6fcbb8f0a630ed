#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "transfuse/cohort.hpp"
#include "transfuse/explain.hpp"
#include "transfuse/metrics.hpp"
#include "transfuse/scenarios.hpp"

namespace transfuse {

enum class BandStyle { StdDev, ConfidenceInterval };

// Mean curve per model with a shaded band when more than one scenario went
// into it. SVG text depends only on the inputs.
std::string render_curves_svg(const std::vector<ModelCurves>& curves, CurveKind kind,
                              BandStyle style = BandStyle::StdDev);

// model,x,mean,std,ci_low,ci_high; one row per grid point (or raw point
// when a curve carries no band).
void write_curve_points(std::ostream& out, const std::vector<ModelCurves>& curves, CurveKind kind);

struct BoxStats {
  std::string group;
  std::size_t n = 0;
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double whisker_low = 0.0, whisker_high = 0.0;  // furthest points within 1.5 IQR
  std::vector<double> values;
};

// Hemoglobin of each non-transfused encounter and each index transfusion.
std::vector<BoxStats> hemoglobin_boxes(const std::vector<CohortInstance>& instances);
std::string render_boxplot_svg(const std::vector<BoxStats>& boxes, const std::string& y_label);
void write_box_stats(std::ostream& out, const std::vector<BoxStats>& boxes);

std::string render_panel_svg(const Panel& panel);

// ROC, PR and calibration figures as <kind>.csv and <kind>.svg in `dir`.
std::vector<std::filesystem::path> emit_curve_plots(const std::vector<ModelCurves>& curves,
                                                    const std::filesystem::path& dir,
                                                    BandStyle style = BandStyle::StdDev);
std::vector<std::filesystem::path> emit_hemoglobin_plot(const std::vector<CohortInstance>& instances,
                                                        const std::filesystem::path& dir);
std::vector<std::filesystem::path> emit_panel_plots(const Panel& panel, const std::filesystem::path& dir);

}  // namespace transfuse
