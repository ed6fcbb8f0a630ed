#include "transfuse/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "transfuse/errors.hpp"
#include "transfuse/schema.hpp"
#include "transfuse/stats.hpp"

namespace transfuse {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#111111", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Maps data coordinates into a plot rectangle.
struct Frame {
  double left, top, width, height;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

class Svg {
 public:
  Svg(double w, double h) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
         << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n";
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 12, const char* anchor = "middle", double rotate = 0) {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size << "\" text-anchor=\"" << anchor
         << '"';
    if (rotate != 0) out_ << " transform=\"rotate(" << num(rotate) << ' ' << num(x) << ' ' << num(y) << ")\"";
    out_ << '>' << escape(s) << "</text>\n";
  }

  void line(double x1, double y1, double x2, double y2, const char* stroke, double width = 1,
            const char* dash = nullptr) {
    out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
         << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << '"';
    if (dash) out_ << " stroke-dasharray=\"" << dash << '"';
    out_ << "/>\n";
  }

  void rect(double x, double y, double w, double h, const char* fill, const char* stroke = "none") {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
         << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void circle(double x, double y, double r, const char* fill, double opacity = 1.0) {
    out_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill
         << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke, double width = 1.5) {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
    out_ << "\"/>\n";
  }

  void polygon(const std::vector<std::pair<double, double>>& pts, const char* fill, double opacity) {
    out_ << "<polygon stroke=\"none\" fill=\"" << fill << "\" fill-opacity=\"" << num(opacity) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
    out_ << "\"/>\n";
  }

  void axes(const Frame& f, const std::string& xlabel, const std::string& ylabel, int ticks = 5) {
    rect(f.left, f.top, f.width, f.height, "none", "#444444");
    for (int t = 0; t <= ticks; ++t) {
      const double xv = f.x0 + (f.x1 - f.x0) * t / ticks;
      const double yv = f.y0 + (f.y1 - f.y0) * t / ticks;
      line(f.px(xv), f.top + f.height, f.px(xv), f.top + f.height + 4, "#444444");
      text(f.px(xv), f.top + f.height + 16, tick_label(xv), 10);
      line(f.left - 4, f.py(yv), f.left, f.py(yv), "#444444");
      text(f.left - 6, f.py(yv) + 3, tick_label(yv), 10, "end");
    }
    text(f.left + f.width / 2, f.top + f.height + 34, xlabel);
    text(f.left - 38, f.top + f.height / 2, ylabel, 12, "middle", -90);
  }

  std::string str() const { return out_.str() + "</svg>\n"; }

 private:
  static std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

  std::ostringstream out_;
};

struct KindText {
  const char* title;
  const char* x;
  const char* y;
};

KindText kind_text(CurveKind k) {
  switch (k) {
    case CurveKind::ROC: return {"ROC curves", "False positive rate", "True positive rate"};
    case CurveKind::PR: return {"Precision-recall curves", "Recall", "Precision"};
    case CurveKind::Calibration: return {"Calibration curves", "Mean predicted probability", "Fraction of positives"};
  }
  return {"", "", ""};
}

const CurveSeries& pick(const ModelCurves& c, CurveKind k) {
  switch (k) {
    case CurveKind::ROC: return c.roc;
    case CurveKind::PR: return c.pr;
    case CurveKind::Calibration: return c.calibration;
  }
  return c.roc;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::string render_curves_svg(const std::vector<ModelCurves>& curves, CurveKind kind, BandStyle style) {
  const KindText t = kind_text(kind);
  Svg svg(560, 460);
  const Frame f{70, 40, 340, 340};
  svg.text(f.left + f.width / 2, 24, t.title, 14);
  if (kind != CurveKind::PR) svg.line(f.px(0), f.py(0), f.px(1), f.py(1), "#999999", 1, "4,4");
  for (std::size_t m = 0; m < curves.size(); ++m) {
    const CurveSeries& s = pick(curves[m], kind);
    const char* color = kPalette[m % kPalette.size()];
    if (s.band && s.band->n_series > 1) {
      const auto& b = *s.band;
      std::vector<std::pair<double, double>> poly;
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        const double hi = style == BandStyle::StdDev ? b.mean[i] + b.std[i] : b.ci_high[i];
        poly.emplace_back(f.px(s.points[i].x), f.py(std::clamp(hi, 0.0, 1.0)));
      }
      for (std::size_t i = s.points.size(); i-- > 0;) {
        const double lo = style == BandStyle::StdDev ? b.mean[i] - b.std[i] : b.ci_low[i];
        poly.emplace_back(f.px(s.points[i].x), f.py(std::clamp(lo, 0.0, 1.0)));
      }
      svg.polygon(poly, color, 0.15);
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : s.points) pts.emplace_back(f.px(p.x), f.py(p.y));
    svg.polyline(pts, color);
    const double ly = f.top + 10 + 18 * static_cast<double>(m);
    svg.line(f.left + f.width + 20, ly, f.left + f.width + 44, ly, color, 2.5);
    svg.text(f.left + f.width + 50, ly + 4, curves[m].model, 12, "start");
  }
  svg.axes(f, t.x, t.y);
  return svg.str();
}

void write_curve_points(std::ostream& out, const std::vector<ModelCurves>& curves, CurveKind kind) {
  out << "model,x,mean,std,ci_low,ci_high\n";
  for (const auto& c : curves) {
    const CurveSeries& s = pick(c, kind);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      out << c.model << ',' << fmt17(s.points[i].x) << ',' << fmt17(s.points[i].y);
      if (s.band) {
        out << ',' << fmt17(s.band->std[i]) << ',' << fmt17(s.band->ci_low[i]) << ',' << fmt17(s.band->ci_high[i]);
      } else {
        out << ",,,";
      }
      out << '\n';
    }
  }
}

std::vector<BoxStats> hemoglobin_boxes(const std::vector<CohortInstance>& instances) {
  std::array<BoxStats, 2> boxes;
  boxes[0].group = "Non-transfused";
  boxes[1].group = "Transfused";
  for (const auto& inst : instances) {
    if (inst.label == 1 && inst.event_index != 1) continue;
    const double v = inst.features[kHemoglobin];
    if (!is_missing(v)) boxes[inst.label == 1 ? 1 : 0].values.push_back(v);
  }
  for (auto& b : boxes) {
    std::sort(b.values.begin(), b.values.end());
    b.n = b.values.size();
    if (b.values.empty()) continue;
    b.q1 = stats::quantile(b.values, 0.25);
    b.median = stats::quantile(b.values, 0.5);
    b.q3 = stats::quantile(b.values, 0.75);
    const double iqr = b.q3 - b.q1;
    b.whisker_low = *std::lower_bound(b.values.begin(), b.values.end(), b.q1 - 1.5 * iqr);
    b.whisker_high = *std::prev(std::upper_bound(b.values.begin(), b.values.end(), b.q3 + 1.5 * iqr));
  }
  return {boxes.begin(), boxes.end()};
}

std::string render_boxplot_svg(const std::vector<BoxStats>& boxes, const std::string& y_label) {
  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (const auto& b : boxes) {
    if (b.values.empty()) continue;
    lo = any ? std::min(lo, b.values.front()) : b.values.front();
    hi = any ? std::max(hi, b.values.back()) : b.values.back();
    any = true;
  }
  if (hi <= lo) hi = lo + 1.0;
  Svg svg(460, 440);
  Frame f{70, 30, 360, 340};
  f.y0 = lo;
  f.y1 = hi;
  const double slot = f.width / static_cast<double>(std::max<std::size_t>(1, boxes.size()));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const double cx = f.left + slot * (static_cast<double>(i) + 0.5);
    const char* color = kPalette[i % kPalette.size()];
    svg.text(cx, f.top + f.height + 16, b.group + " (n=" + std::to_string(b.n) + ")", 11);
    if (b.values.empty()) continue;
    // Strip of points, thinned to at most 400 per group with a fixed stride.
    const std::size_t stride = std::max<std::size_t>(1, b.values.size() / 400);
    for (std::size_t k = 0; k < b.values.size(); k += stride) {
      const double jitter = (static_cast<double>(k * 2654435761ULL % 1000) / 1000.0 - 0.5) * slot * 0.5;
      svg.circle(cx + jitter, f.py(b.values[k]), 1.5, color, 0.25);
    }
    const double w = slot * 0.3;
    svg.rect(cx - w / 2, f.py(b.q3), w, f.py(b.q1) - f.py(b.q3), "none", "#222222");
    svg.line(cx - w / 2, f.py(b.median), cx + w / 2, f.py(b.median), "#222222", 2);
    svg.line(cx, f.py(b.q3), cx, f.py(b.whisker_high), "#222222");
    svg.line(cx, f.py(b.q1), cx, f.py(b.whisker_low), "#222222");
    svg.line(cx - w / 4, f.py(b.whisker_high), cx + w / 4, f.py(b.whisker_high), "#222222");
    svg.line(cx - w / 4, f.py(b.whisker_low), cx + w / 4, f.py(b.whisker_low), "#222222");
  }
  svg.rect(f.left, f.top, f.width, f.height, "none", "#444444");
  for (int t = 0; t <= 5; ++t) {
    const double v = lo + (hi - lo) * t / 5;
    svg.line(f.left - 4, f.py(v), f.left, f.py(v), "#444444");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    svg.text(f.left - 6, f.py(v) + 3, buf, 10, "end");
  }
  svg.text(f.left - 44, f.top + f.height / 2, y_label, 12, "middle", -90);
  return svg.str();
}

void write_box_stats(std::ostream& out, const std::vector<BoxStats>& boxes) {
  out << "group,n,whisker_low,q1,median,q3,whisker_high\n";
  for (const auto& b : boxes) {
    out << b.group << ',' << b.n << ',' << fmt17(b.whisker_low) << ',' << fmt17(b.q1) << ',' << fmt17(b.median) << ','
        << fmt17(b.q3) << ',' << fmt17(b.whisker_high) << '\n';
  }
}

std::string render_panel_svg(const Panel& panel) {
  const double row_h = 200;
  const double height = 60 + row_h * static_cast<double>(std::max<std::size_t>(1, panel.bases.size()));
  Svg svg(1100, height);
  svg.text(550, 24, "Attribution panel", 15);

  auto bars = [&](const Frame& f, const std::vector<FeatureImportance>& items, std::size_t k, const char* color,
                  const std::string& title) {
    svg.text(f.left + f.width / 2, f.top - 8, title, 12);
    k = std::min(k, items.size());
    double top = 0.0;
    for (std::size_t i = 0; i < k; ++i) top = std::max(top, items[i].mean_abs);
    if (top <= 0.0) top = 1.0;
    const double bh = f.height / static_cast<double>(std::max<std::size_t>(1, k));
    for (std::size_t i = 0; i < k; ++i) {
      const double y = f.top + bh * static_cast<double>(i);
      svg.rect(f.left, y + bh * 0.15, items[i].mean_abs / top * f.width, bh * 0.7, color);
      svg.text(f.left - 6, y + bh * 0.5 + 4, items[i].name, 10, "end");
    }
    svg.line(f.left, f.top, f.left, f.top + f.height, "#444444");
    svg.text(f.left + f.width / 2, f.top + f.height + 16, "mean |attribution|", 10);
  };

  const double meta_h = row_h * static_cast<double>(panel.bases.size()) - 60;
  bars(Frame{90, 70, 170, std::max(60.0, meta_h)}, panel.meta_ranking, panel.meta_ranking.size(), "#5b5b5b",
       "Meta-model inputs");

  for (std::size_t b = 0; b < panel.bases.size(); ++b) {
    const auto& e = panel.bases[b];
    const double top = 70 + row_h * static_cast<double>(b);
    const char* color = kPalette[b % kPalette.size()];
    bars(Frame{500, top, 180, row_h - 70}, e.ranking, static_cast<std::size_t>(panel.top_k), color,
         e.model + ": top features");

    if (e.scatter.empty()) continue;
    const ScatterSeries& s = e.scatter.front();
    double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
    bool any = false;
    for (const auto& p : s.points) {
      if (std::isnan(p.x)) continue;
      xlo = any ? std::min(xlo, p.x) : p.x;
      xhi = any ? std::max(xhi, p.x) : p.x;
      ylo = any ? std::min(ylo, p.y) : p.y;
      yhi = any ? std::max(yhi, p.y) : p.y;
      any = true;
    }
    if (!any) continue;
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;
    Frame f{800, top, 250, row_h - 70, xlo, xhi, ylo, yhi};
    svg.text(f.left + f.width / 2, f.top - 8, e.model + ": " + s.feature, 12);
    if (ylo < 0 && yhi > 0) svg.line(f.left, f.py(0), f.left + f.width, f.py(0), "#999999", 1, "3,3");
    for (const auto& p : s.points) {
      if (!std::isnan(p.x)) svg.circle(f.px(p.x), f.py(p.y), 2, color, 0.6);
    }
    svg.axes(f, s.feature, "attribution", 4);
  }
  return svg.str();
}

std::vector<std::filesystem::path> emit_curve_plots(const std::vector<ModelCurves>& curves,
                                                    const std::filesystem::path& dir, BandStyle style) {
  if (curves.empty()) throw ValidationError("no curves to plot");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const CurveKind k : {CurveKind::ROC, CurveKind::PR, CurveKind::Calibration}) {
    const std::string stem(curve_kind_name(k));
    std::ostringstream csv;
    write_curve_points(csv, curves, k);
    write_file(dir / (stem + ".csv"), csv.str());
    write_file(dir / (stem + ".svg"), render_curves_svg(curves, k, style));
    written.push_back(dir / (stem + ".csv"));
    written.push_back(dir / (stem + ".svg"));
  }
  return written;
}

std::vector<std::filesystem::path> emit_hemoglobin_plot(const std::vector<CohortInstance>& instances,
                                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto boxes = hemoglobin_boxes(instances);
  std::ostringstream csv;
  write_box_stats(csv, boxes);
  write_file(dir / "hemoglobin.csv", csv.str());
  write_file(dir / "hemoglobin.svg", render_boxplot_svg(boxes, "Hemoglobin (g/dL)"));
  return {dir / "hemoglobin.csv", dir / "hemoglobin.svg"};
}

std::vector<std::filesystem::path> emit_panel_plots(const Panel& panel, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream json, csv;
  write_panel_json(json, panel);
  write_panel_scatter(csv, panel);
  write_file(dir / "panel.json", json.str());
  write_file(dir / "panel_scatter.csv", csv.str());
  write_file(dir / "panel.svg", render_panel_svg(panel));
  return {dir / "panel.json", dir / "panel_scatter.csv", dir / "panel.svg"};
}

}  // namespace transfuse
