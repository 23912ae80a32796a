#include "tolkit/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace tolkit {

namespace {

constexpr int kTicks = 5;
constexpr const char* kToleranceColor = "#3182bd";
constexpr const char* kNoToleranceColor = "#de2d26";
constexpr const char* kInconclusiveColor = "#bdbdbd";
constexpr const char* kSkippedColor = "#f7f7f7";
constexpr const char* kOutsideColor = "#969696";
constexpr const char* kErrorColor = "#000000";
constexpr std::size_t kMaxRegionPoints = 2000;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

struct Legend {
    std::vector<std::pair<std::string, std::string>> entries;  // color, label
};

class Document {
public:
    Document(const Box& box, const SvgStyle& style) : vp_(box, style) {
        const SvgStyle& s = vp_.style();
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << s.width << "\" height=\"" << s.height
             << "\" viewBox=\"0 0 " << s.width << ' ' << s.height << "\">\n";
        out_ << "<rect x=\"0\" y=\"0\" width=\"" << s.width << "\" height=\"" << s.height << "\" fill=\"#ffffff\"/>\n";
        out_ << "<defs><clipPath id=\"plot\"><rect x=\"" << s.margin << "\" y=\"" << s.margin / 2 << "\" width=\""
             << plot_w() << "\" height=\"" << plot_h() << "\"/></clipPath></defs>\n";
        if (!s.title.empty()) {
            out_ << "<text x=\"" << s.width / 2 << "\" y=\"" << s.margin / 3
                 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(s.title)
                 << "</text>\n";
        }
        out_ << "<g clip-path=\"url(#plot)\">\n";
    }

    void rect_cell(double x0, double y0, double x1, double y1, const std::string& fill, const std::string& stroke,
                   const char* cls = "cell") {
        const double left = vp_.sx(x0), right = vp_.sx(x1), top = vp_.sy(y1), bottom = vp_.sy(y0);
        out_ << "<rect class=\"" << cls << "\" x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\""
             << num(right - left) << "\" height=\"" << num(bottom - top) << "\" fill=\"" << fill << '"';
        if (!stroke.empty()) out_ << " stroke=\"" << stroke << "\" stroke-width=\"1.2\"";
        out_ << "/>\n";
    }

    void polyline(const std::vector<Vec2>& pts, const std::string& color, double width, const std::string& cls) {
        if (pts.empty()) return;
        out_ << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
             << width << "\" points=\"";
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (k) out_ << ' ';
            out_ << num(vp_.sx(pts[k].x)) << ',' << num(vp_.sy(pts[k].y));
        }
        out_ << "\"/>\n";
    }

    void polygon(const std::vector<Vec2>& pts, const std::string& fill, const std::string& cls) {
        if (pts.size() < 3) return;
        out_ << "<polygon class=\"" << cls << "\" fill=\"" << fill << "\" fill-opacity=\"0.55\" stroke=\"none\" points=\"";
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (k) out_ << ' ';
            out_ << num(vp_.sx(pts[k].x)) << ',' << num(vp_.sy(pts[k].y));
        }
        out_ << "\"/>\n";
    }

    void segments(const std::vector<Segment2>& segs, const std::string& color, double width, const std::string& cls,
                  const std::string& extra) {
        out_ << "<path class=\"" << cls << "\"" << extra << " fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"" << width << "\" d=\"";
        bool first = true;
        for (const Segment2& s : segs) {
            if (!first) out_ << ' ';
            first = false;
            out_ << 'M' << num(vp_.sx(s[0].x)) << ',' << num(vp_.sy(s[0].y)) << 'L' << num(vp_.sx(s[1].x)) << ','
                 << num(vp_.sy(s[1].y));
        }
        out_ << "\"/>\n";
    }

    void marker(Vec2 p, const std::string& color, double r, const std::string& label) {
        out_ << "<circle class=\"marker\" cx=\"" << num(vp_.sx(p.x)) << "\" cy=\"" << num(vp_.sy(p.y)) << "\" r=\"" << r
             << "\" fill=\"" << color << "\"/>\n";
        if (!label.empty()) {
            out_ << "<text x=\"" << num(vp_.sx(p.x) + r + 2) << "\" y=\"" << num(vp_.sy(p.y) - r - 2)
                 << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(label) << "</text>\n";
        }
    }

    std::string finish(const Legend& legend) {
        out_ << "</g>\n";
        axes();
        if (!legend.entries.empty()) legend_box(legend);
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    [[nodiscard]] int plot_w() const { return vp_.style().width - 3 * vp_.style().margin / 2; }
    [[nodiscard]] int plot_h() const { return vp_.style().height - 3 * vp_.style().margin / 2; }

    void axes() {
        const SvgStyle& s = vp_.style();
        const Box& b = vp_.box();
        out_ << "<g class=\"axes\" font-family=\"sans-serif\" font-size=\"11\">\n";
        out_ << "<rect x=\"" << s.margin << "\" y=\"" << s.margin / 2 << "\" width=\"" << plot_w() << "\" height=\""
             << plot_h() << "\" fill=\"none\" stroke=\"#000000\"/>\n";
        for (int k = 0; k <= kTicks; ++k) {
            const double x = b.xmin + (b.xmax - b.xmin) * k / kTicks;
            const double y = b.ymin + (b.ymax - b.ymin) * k / kTicks;
            const double px = vp_.sx(x), py = vp_.sy(y);
            const double bottom = vp_.sy(b.ymin), left = vp_.sx(b.xmin);
            out_ << "<line x1=\"" << num(px) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(px) << "\" y2=\""
                 << num(bottom + 5) << "\" stroke=\"#000000\"/>\n";
            out_ << "<text x=\"" << num(px) << "\" y=\"" << num(bottom + 17) << "\" text-anchor=\"middle\">"
                 << label_num(x) << "</text>\n";
            out_ << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(left) << "\" y2=\""
                 << num(py) << "\" stroke=\"#000000\"/>\n";
            out_ << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
                 << label_num(y) << "</text>\n";
        }
        out_ << "<text x=\"" << num(vp_.sx(0.5 * (b.xmin + b.xmax))) << "\" y=\"" << s.height - 6
             << "\" text-anchor=\"middle\">x</text>\n";
        out_ << "<text x=\"12\" y=\"" << num(vp_.sy(0.5 * (b.ymin + b.ymax))) << "\">y</text>\n";
        out_ << "</g>\n";
    }

    void legend_box(const Legend& legend) {
        const SvgStyle& s = vp_.style();
        const int w = 150, row = 16;
        const int x = s.width - s.margin / 2 - w - 6, y = s.margin / 2 + 6;
        out_ << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
        out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\""
             << row * static_cast<int>(legend.entries.size()) + 8
             << "\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#636363\"/>\n";
        for (std::size_t k = 0; k < legend.entries.size(); ++k) {
            const int ry = y + 6 + row * static_cast<int>(k);
            out_ << "<rect x=\"" << x + 6 << "\" y=\"" << ry << "\" width=\"12\" height=\"10\" fill=\""
                 << legend.entries[k].first << "\"/>\n";
            out_ << "<text x=\"" << x + 24 << "\" y=\"" << ry + 9 << "\">" << escape(legend.entries[k].second)
                 << "</text>\n";
        }
        out_ << "</g>\n";
    }

    Viewport vp_;
    std::ostringstream out_;
};

const char* outcome_color(const ScanCell& c) {
    switch (c.status) {
        case CellStatus::skipped_a3:
            return kSkippedColor;
        case CellStatus::outside_basin:
            return kOutsideColor;
        case CellStatus::error:
            return kErrorColor;
        case CellStatus::evaluated:
            break;
    }
    switch (c.outcome) {
        case Outcome::tolerance:
            return kToleranceColor;
        case Outcome::no_tolerance:
            return kNoToleranceColor;
        case Outcome::inconclusive:
            return kInconclusiveColor;
    }
    return kInconclusiveColor;
}

// Interpolated crossing of the level on the edge (a, va) - (b, vb).
Vec2 crossing(Vec2 a, double va, Vec2 b, double vb) {
    const double s = va / (va - vb);
    return a + s * (b - a);
}

std::string isocline_color(std::size_t k, std::size_t n) {
    const double s = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0;
    const int r = static_cast<int>(std::lround(158 - 120 * s));
    const int g = static_cast<int>(std::lround(202 - 100 * s));
    const int b = static_cast<int>(std::lround(225 - 40 * s));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

// Evenly strided subsample, endpoints kept.
std::vector<Vec2> thin(const std::vector<Vec2>& pts, std::size_t max_points) {
    if (pts.size() <= max_points) return pts;
    std::vector<Vec2> out;
    out.reserve(max_points);
    const double stride = static_cast<double>(pts.size() - 1) / static_cast<double>(max_points - 1);
    for (std::size_t i = 0; i < max_points; ++i) out.push_back(pts[static_cast<std::size_t>(std::llround(i * stride))]);
    return out;
}

}  // namespace

Viewport::Viewport(const Box& box, const SvgStyle& style) : box_(box), style_(style) {
    if (!(box_.xmax > box_.xmin)) box_.xmax = box_.xmin + 1.0;
    if (!(box_.ymax > box_.ymin)) box_.ymax = box_.ymin + 1.0;
}

double Viewport::sx(double x) const {
    const double w = style_.width - 1.5 * style_.margin;
    return style_.margin + (x - box_.xmin) / (box_.xmax - box_.xmin) * w;
}

double Viewport::sy(double y) const {
    const double h = style_.height - 1.5 * style_.margin;
    return 0.5 * style_.margin + (box_.ymax - y) / (box_.ymax - box_.ymin) * h;
}

std::vector<Segment2> level_set(const std::function<bool(double, double, double&)>& fn, const Box& box, int n,
                                double level) {
    std::vector<Segment2> out;
    if (n < 1) return out;
    const int m = n + 1;
    std::vector<double> v(static_cast<std::size_t>(m * m));
    std::vector<char> ok(static_cast<std::size_t>(m * m));
    auto corner = [&](int i, int j) {
        return Vec2{box.xmin + (box.xmax - box.xmin) * i / n, box.ymin + (box.ymax - box.ymin) * j / n};
    };
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            const Vec2 p = corner(i, j);
            double val = 0.0;
            const std::size_t k = static_cast<std::size_t>(j * m + i);
            ok[k] = fn(p.x, p.y, val) && std::isfinite(val);
            v[k] = val - level;
        }
    }
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t k00 = static_cast<std::size_t>(j * m + i), k10 = k00 + 1;
            const std::size_t k01 = k00 + static_cast<std::size_t>(m), k11 = k01 + 1;
            if (!ok[k00] || !ok[k10] || !ok[k01] || !ok[k11]) continue;
            const Vec2 p00 = corner(i, j), p10 = corner(i + 1, j), p01 = corner(i, j + 1), p11 = corner(i + 1, j + 1);
            const double a = v[k00], b = v[k10], c = v[k11], d = v[k01];
            // Corner order around the cell: p00 (a), p10 (b), p11 (c), p01 (d).
            const int idx = (a > 0) | ((b > 0) << 1) | ((c > 0) << 2) | ((d > 0) << 3);
            if (idx == 0 || idx == 15) continue;
            const Vec2 e0 = crossing(p00, a, p10, b);  // bottom
            const Vec2 e1 = crossing(p10, b, p11, c);  // right
            const Vec2 e2 = crossing(p01, d, p11, c);  // top
            const Vec2 e3 = crossing(p00, a, p01, d);  // left
            const bool center_pos = 0.25 * (a + b + c + d) > 0;
            switch (idx) {
                case 1:
                case 14:
                    out.push_back({e3, e0});
                    break;
                case 2:
                case 13:
                    out.push_back({e0, e1});
                    break;
                case 3:
                case 12:
                    out.push_back({e3, e1});
                    break;
                case 4:
                case 11:
                    out.push_back({e1, e2});
                    break;
                case 6:
                case 9:
                    out.push_back({e0, e2});
                    break;
                case 7:
                case 8:
                    out.push_back({e3, e2});
                    break;
                case 5:
                    if (center_pos) {
                        out.push_back({e3, e2});
                        out.push_back({e0, e1});
                    } else {
                        out.push_back({e3, e0});
                        out.push_back({e1, e2});
                    }
                    break;
                case 10:
                    if (center_pos) {
                        out.push_back({e3, e0});
                        out.push_back({e1, e2});
                    } else {
                        out.push_back({e3, e2});
                        out.push_back({e0, e1});
                    }
                    break;
                default:
                    break;
            }
        }
    }
    return out;
}

std::vector<Vec2> trajectory_polyline(const Trajectory& tr, double t_max, std::size_t max_points) {
    std::vector<Vec2> out;
    if (tr.empty()) return out;
    const double t0 = tr.t_begin();
    const double t1 = std::min(t_max, tr.t_end());
    if (!(t1 > t0)) {
        out.push_back(tr.initial());
        return out;
    }
    std::vector<double> ts;
    for (double t : tr.times()) {
        if (t > t1) break;
        ts.push_back(t);
    }
    if (ts.empty() || ts.back() < t1) ts.push_back(t1);
    if (ts.size() > max_points && max_points >= 2) {
        std::vector<double> thin;
        for (std::size_t k = 0; k < max_points; ++k) {
            thin.push_back(ts[k * (ts.size() - 1) / (max_points - 1)]);
        }
        ts.swap(thin);
    }
    // Steps near the node can be long; fill them with dense output.
    std::vector<Vec2> pts;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        if (k > 0) {
            const double dt = ts[k] - ts[k - 1];
            const int sub = std::clamp(static_cast<int>(dt / ((t1 - t0) / 400.0)), 0, 8);
            for (int s = 1; s < sub; ++s) pts.push_back(tr.eval(ts[k - 1] + dt * s / sub));
        }
        pts.push_back(tr.eval(ts[k]));
    }
    return pts;
}

std::string empty_svg(const std::string& message, const SvgStyle& style) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
        << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << style.width << "\" height=\"" << style.height
        << "\" fill=\"#ffffff\"/>\n";
    out << "<text class=\"diagnostic\" x=\"" << style.width / 2 << "\" y=\"" << style.height / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(message) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

std::string render_portrait_svg(const PlanarSystem& sys, const PortraitSpec& spec, const SvgStyle& style) {
    Document doc(spec.box, style);
    Legend legend;
    for (const std::vector<Vec2>& poly : spec.filled) doc.polygon(poly, "#a1d99b", "region");

    auto f_level = [&](double x, double y, double& out) { return sys.f_fast(x, y, out); };
    for (std::size_t k = 0; k < spec.isoclines.size(); ++k) {
        const double c = spec.isoclines[k];
        doc.segments(level_set(f_level, spec.box, spec.grid, c), isocline_color(k, spec.isoclines.size()), 0.8,
                     "isocline", " data-level=\"" + label_num(c) + "\"");
    }
    if (!spec.isoclines.empty()) legend.entries.emplace_back(isocline_color(0, 1), "isoclines f = C");
    if (spec.nullclines) {
        auto g_level = [&](double x, double y, double& out) {
            double fx = 0.0;
            return sys.field_fast(x, y, fx, out);
        };
        doc.segments(level_set(f_level, spec.box, spec.grid, 0.0), "#31a354", 1.6, "nullcline-f", "");
        doc.segments(level_set(g_level, spec.box, spec.grid, 0.0), "#fd8d3c", 1.6, "nullcline-g", "");
        legend.entries.emplace_back("#31a354", "f = 0");
        legend.entries.emplace_back("#fd8d3c", "g = 0");
    }
    if (spec.inhibition_boundary) {
        auto fy_level = [&](double x, double y, double& out) { return sys.fy_fast(x, y, out); };
        doc.segments(level_set(fy_level, spec.box, spec.grid, 0.0), "#756bb1", 1.2, "inhibition", "");
        legend.entries.emplace_back("#756bb1", "f_y = 0");
    }
    for (const Polyline& c : spec.curves) {
        doc.polyline(c.points, c.color.empty() ? "#000000" : c.color, 1.5, "trajectory");
        if (!c.label.empty()) legend.entries.emplace_back(c.color.empty() ? "#000000" : c.color, c.label);
    }
    for (const Marker& m : spec.markers) doc.marker(m.p, m.color.empty() ? "#000000" : m.color, 3.5, m.label);
    return doc.finish(legend);
}

std::string render_regions_svg(const CandidateClassifier& cls, const Box& box, const SvgStyle& style) {
    const ExcitabilityReport& rep = cls.report();
    PortraitSpec spec;
    spec.box = box;
    spec.inhibition_boundary = true;
    Document doc(box, style);
    Legend legend;
    if (cls.strip()) {
        const StripRegion& s = *cls.strip();
        const std::string fill = s.check().f_nonpositive ? "#fee391" : "#f0f0f0";
        doc.rect_cell(s.x_lo(), s.y_lo(), s.x_hi(), box.ymax, fill, "", "region-T-hat");
        legend.entries.emplace_back(fill, s.check().f_nonpositive ? "T-hat (f <= 0)" : "strip (f > 0 sampled)");
    }
    if (cls.loop()) {
        doc.polygon(thin(cls.loop()->graph(), kMaxRegionPoints), "#74c476", "region-T");
        legend.entries.emplace_back("#74c476", "T");
    }
    const PlanarSystem& sys = cls.system();
    auto f_level = [&](double x, double y, double& out) { return sys.f_fast(x, y, out); };
    auto g_level = [&](double x, double y, double& out) {
        double fx = 0.0;
        return sys.field_fast(x, y, fx, out);
    };
    auto fy_level = [&](double x, double y, double& out) { return sys.fy_fast(x, y, out); };
    doc.segments(level_set(f_level, box, spec.grid, 0.0), "#31a354", 1.4, "nullcline-f", "");
    doc.segments(level_set(g_level, box, spec.grid, 0.0), "#fd8d3c", 1.4, "nullcline-g", "");
    doc.segments(level_set(fy_level, box, spec.grid, 0.0), "#756bb1", 1.2, "inhibition", "");
    legend.entries.emplace_back("#31a354", "f = 0");
    legend.entries.emplace_back("#fd8d3c", "g = 0");
    legend.entries.emplace_back("#756bb1", "f_y = 0");
    doc.polyline(trajectory_polyline(rep.trajectory, std::numeric_limits<double>::infinity()), "#000000", 1.5,
                 "trajectory");
    legend.entries.emplace_back("#000000", "reference");
    if (cls.loop()) {
        doc.polyline({rep.r0, {rep.r0.x, rep.y_at_tr}}, "#006d2c", 2.0, "segment-L");
    }
    doc.marker(rep.r0, "#cb181d", 4.0, "r0");
    return doc.finish(legend);
}

std::string render_map_svg(const ToleranceMap& map, const SvgStyle& style) {
    if (map.cells.empty()) return empty_svg("empty tolerance map", style);
    const GridSpec& g = map.grid;
    Document doc({g.x_min, g.x_max, g.y_min, g.y_max}, style);
    const double dx = (g.x_max - g.x_min) / g.nx, dy = (g.y_max - g.y_min) / g.ny;
    for (const ScanCell& c : map.cells) {
        std::string stroke;
        if (c.prediction == PredictionKind::guaranteed) stroke = "#08306b";
        if (c.prediction == PredictionKind::impossible) stroke = "#67000d";
        const double x0 = g.x_min + dx * c.i, y0 = g.y_min + dy * c.j;
        doc.rect_cell(x0, y0, x0 + dx, y0 + dy, outcome_color(c), stroke);
    }
    doc.marker(map.r0, "#ffffff", 3.5, "r0");
    Legend legend;
    legend.entries = {{kToleranceColor, "tolerance"},         {kNoToleranceColor, "no tolerance"},
                      {kInconclusiveColor, "inconclusive"},   {kOutsideColor, "outside basin"},
                      {kSkippedColor, "x < x_r"},             {"#08306b", "guaranteed (outline)"},
                      {"#67000d", "impossible (outline)"}};
    return doc.finish(legend);
}

std::string render_basin_svg(const BasinRaster& raster, const SvgStyle& style) {
    if (raster.inside.empty()) return empty_svg("empty basin raster", style);
    Document doc(raster.box, style);
    const double dx = (raster.box.xmax - raster.box.xmin) / raster.nx;
    const double dy = (raster.box.ymax - raster.box.ymin) / raster.ny;
    for (int j = 0; j < raster.ny; ++j) {
        for (int i = 0; i < raster.nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(j * raster.nx + i);
            const char* fill = raster.inside[k] ? "#9ecae1" : (raster.conclusive[k] ? "#f7f7f7" : kInconclusiveColor);
            const double x0 = raster.box.xmin + dx * i, y0 = raster.box.ymin + dy * j;
            doc.rect_cell(x0, y0, x0 + dx, y0 + dy, fill, "");
        }
    }
    doc.marker(raster.fixed_point, "#000000", 3.5, "node");
    Legend legend;
    legend.entries = {{"#9ecae1", "in basin"}, {"#f7f7f7", "outside"}, {kInconclusiveColor, "inconclusive"}};
    return doc.finish(legend);
}

}  // namespace tolkit
