#include <catch2/catch_amalgamated.hpp>

#include "tolkit/render.hpp"

#include <cmath>

using namespace tolkit;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("map with 2x2 cells", "[render]") {
    const ToleranceMap m = scan_grid(builtin("ex2"), {4.0, 0.0}, {4.0, 8.0, 0.0, 25.0, 2, 2});
    const std::string svg = render_map_svg(m);
    CHECK(count(svg, "class=\"cell\"") == 4);
    CHECK(count(svg, "class=\"axes\"") == 1);
    CHECK(svg.rfind("</svg>") != std::string::npos);
    CHECK(svg == render_map_svg(m));
}

TEST_CASE("isocline family", "[render]") {
    PortraitSpec spec;
    spec.box = {0.0, 10.0, 0.0, 30.0};
    spec.isoclines = {-4.0, -2.0, 0.0, 5.0, 10.0, 20.0, 35.0, 50.0};
    const std::string svg = render_portrait_svg(builtin("ex2"), spec);
    CHECK(count(svg, "class=\"isocline\"") == spec.isoclines.size());
    CHECK(count(svg, "class=\"nullcline-f\"") == 1);
    CHECK(svg == render_portrait_svg(builtin("ex2"), spec));
}

TEST_CASE("level set of a circle", "[render]") {
    auto fn = [](double x, double y, double& out) {
        out = x * x + y * y;
        return true;
    };
    const std::vector<Segment2> segs = level_set(fn, {-2.0, 2.0, -2.0, 2.0}, 100, 1.0);
    REQUIRE(segs.size() > 100);
    for (const Segment2& s : segs) {
        for (const Vec2& p : s) CHECK(std::fabs(norm(p) - 1.0) < 1e-3);
    }
    // Undefined samples produce no segments.
    auto undefined = [](double, double, double&) { return false; };
    CHECK(level_set(undefined, {0.0, 1.0, 0.0, 1.0}, 10, 0.0).empty());
}

TEST_CASE("regions and empty documents", "[render]") {
    const CandidateClassifier cls(builtin("ex2"), {4.0, 0.0});
    const std::string svg = render_regions_svg(cls, {3.0, 8.0, 0.0, 25.0});
    CHECK(count(svg, "class=\"region-T\"") == 1);
    CHECK(count(svg, "class=\"region-T-hat\"") == 1);
    CHECK(count(svg, "class=\"segment-L\"") == 1);

    const ToleranceMap empty;
    const std::string e = render_map_svg(empty);
    CHECK(e.find("class=\"diagnostic\"") != std::string::npos);
    CHECK(e.find("<svg") == 0);
}

TEST_CASE("trajectory polyline stops at t_max", "[render]") {
    const Trajectory tr = integrate(builtin("ex2"), {4.0, 0.0});
    const std::vector<Vec2> pts = trajectory_polyline(tr, 0.5);
    REQUIRE_FALSE(pts.empty());
    const Vec2 end = tr.eval(0.5);
    CHECK(pts.back().x == end.x);
    CHECK(pts.back().y == end.y);
    CHECK(trajectory_polyline(tr, 1e9, 100).size() <= 100 * 8);
}
