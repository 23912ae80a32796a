#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "tolkit/geometry.hpp"
#include "tolkit/scan.hpp"
#include "tolkit/system.hpp"

namespace tolkit {

struct SvgStyle {
    int width = 640;
    int height = 480;
    int margin = 56;
    std::string title;
};

// Fixed affine map from a data box to the SVG viewport (y up).
class Viewport {
public:
    Viewport(const Box& box, const SvgStyle& style);

    [[nodiscard]] double sx(double x) const;
    [[nodiscard]] double sy(double y) const;
    [[nodiscard]] const Box& box() const { return box_; }
    [[nodiscard]] const SvgStyle& style() const { return style_; }

private:
    Box box_;
    SvgStyle style_;
};

using Segment2 = std::array<Vec2, 2>;

// Marching squares on an n x n grid of cell corners; undefined samples break the curve.
[[nodiscard]] std::vector<Segment2> level_set(const std::function<bool(double, double, double&)>& fn, const Box& box,
                                              int n, double level);

struct Polyline {
    std::string label;
    std::string color;
    std::vector<Vec2> points;
};

struct Marker {
    std::string label;
    std::string color;
    Vec2 p;
};

struct PortraitSpec {
    Box box{0.0, 1.0, 0.0, 1.0};
    std::vector<double> isoclines;  // levels C of f(x, y) = C
    bool nullclines = true;         // f = 0 and g = 0
    bool inhibition_boundary = false;
    int grid = 200;
    std::vector<Polyline> curves;
    std::vector<Marker> markers;
    std::vector<std::vector<Vec2>> filled;  // closed polygons, drawn under everything else
};

// Samples of tr on [t_begin, min(t_max, t_end)], at most max_points long.
[[nodiscard]] std::vector<Vec2> trajectory_polyline(const Trajectory& tr, double t_max, std::size_t max_points = 1500);

[[nodiscard]] std::string render_portrait_svg(const PlanarSystem& sys, const PortraitSpec& spec,
                                              const SvgStyle& style = {});

// T, T-hat, reference orbit, nullclines and the f_y = 0 curve.
[[nodiscard]] std::string render_regions_svg(const CandidateClassifier& cls, const Box& box,
                                             const SvgStyle& style = {});

// One cell rectangle per grid cell, colored by simulated outcome, outlined by prediction.
[[nodiscard]] std::string render_map_svg(const ToleranceMap& map, const SvgStyle& style = {});

[[nodiscard]] std::string render_basin_svg(const BasinRaster& raster, const SvgStyle& style = {});

// Minimal valid document carrying a diagnostic.
[[nodiscard]] std::string empty_svg(const std::string& message, const SvgStyle& style = {});

}  // namespace tolkit
