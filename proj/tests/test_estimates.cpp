#include <catch2/catch_amalgamated.hpp>

#include "tolkit/estimates.hpp"
#include "tolkit/geometry.hpp"
#include "tolkit/tolerance.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace tolkit;
using Catch::Approx;

namespace {

double quadrature_delta(double w, double a, double b) {
    auto f = [w](double u) { return 1.0 / (u * u / (1.0 + w) - u); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-14);
}

struct Sampler {
    std::mt19937_64 rng;
    explicit Sampler(std::uint64_t seed) : rng(seed) {}
    double u(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

}  // namespace

TEST_CASE("delta examples", "[estimates]") {
    CHECK(delta_fn(3.0, 2.0, 2.0) == 0.0);
    CHECK(delta_fn(1.0, 4.0, 3.0) == Approx(std::log(2.0 / 3.0)).epsilon(1e-14));
    CHECK(delta_fn(1.0, 4.0, 3.0) == Approx(quadrature_delta(1.0, 4.0, 3.0)).epsilon(1e-10));
    CHECK_THROWS_AS(delta_fn(1.0, -1.0, 3.0), DomainError);
    CHECK_THROWS_AS(delta_fn(1.0, 1.0, 3.0), DomainError);  // 1 + w = 2 inside [1, 3]
    CHECK_THROWS_AS(delta_fn(2.0, 3.0, 5.0), DomainError);  // singular endpoint
}

TEST_CASE("delta matches quadrature", "[estimates][property]") {
    Sampler s(17);
    int checked = 0;
    while (checked < 1000) {
        const double w = s.u(0.0, 30.0), a = s.u(0.1, 40.0), b = s.u(0.1, 40.0);
        const double c = 1.0 + w;
        if (c >= std::min(a, b) - 0.05 && c <= std::max(a, b) + 0.05) continue;
        ++checked;
        const double q = quadrature_delta(w, a, b);
        INFO("w=" << w << " a=" << a << " b=" << b);
        CHECK(std::fabs(delta_fn(w, a, b) - q) <= 1e-10 * std::max(1.0, std::fabs(q)));
    }
}

TEST_CASE("delta is the ex2 travel time along a shrinking constant-y chord", "[estimates]") {
    // On y = w the x-equation of ex2 is dx/dt = x^2/(1+w) - x; the true orbit drifts off the chord.
    const PlanarSystem sys = builtin("ex2");
    const double w = 10.0, a = 6.0;
    double previous = std::numeric_limits<double>::infinity();
    for (double h : {0.4, 0.2, 0.1, 0.05}) {
        IntegrationOptions io;
        io.stop_at_ball = false;
        io.events = {{EventKind::x_equals, a - h, true, 0, Termination::event_target}};
        const Trajectory tr = integrate(sys, {a, w}, io);
        REQUIRE(tr.termination() == Termination::event_target);
        const double d = delta_fn(w, a, a - h);
        const double rel = std::fabs(tr.t_end() - d) / std::fabs(d);
        CHECK(rel < previous);
        previous = rel;
    }
    CHECK(previous < 0.05);
}

TEST_CASE("expanded bound", "[estimates]") {
    CHECK(expanded_bound_xhatM(12.0, 2.0, 4.0, 4.0, 4.7, 2.5) ==
          Approx(4.7 + (2.0 / 2.0) * 2.2 + (4.0 / 12.0) * 0.7).epsilon(1e-14));
    CHECK(expanded_bound_xhatM(12.0, 2.0, 2.0, 4.0, 4.7, 2.5) == Approx(4.7 + (2.0 / 12.0) * 0.7));
    CHECK(expanded_bound_xhatM(12.0, 2.0, 2.0, 4.0, 4.0, 2.5) == 4.0);
    CHECK_THROWS_AS(expanded_bound_xhatM(0.0, 2.0, 2.0, 4.0, 4.7, 2.5), std::invalid_argument);
    CHECK_THROWS_AS(expanded_bound_xhatM(12.0, 2.0, 2.0, 4.0, 3.9, 2.5), std::invalid_argument);
    CHECK_THROWS_AS(expanded_bound_xhatM(12.0, 2.0, 2.0, 4.0, 4.7, 4.8), std::invalid_argument);

    Sampler s(3);
    for (int i = 0; i < 500; ++i) {
        const double C_r = s.u(0.1, 20.0), C_f = s.u(0.1, 5.0), C_psi = C_f + s.u(1e-6, 5.0);
        const double x_r = s.u(0.5, 5.0), x_M = x_r + s.u(0.0, 2.0), x_f = x_M - s.u(1e-6, 4.0);
        CHECK(expanded_bound_xhatM(C_r, C_f, C_psi, x_r, x_M, x_f) > x_M);
    }
}

TEST_CASE("ex2 reference decomposes into two segments", "[estimates]") {
    const PlanarSystem sys = builtin("ex2");
    const ReferenceExtremes ex = reference_extremes(sys, {4.0, 0.0});
    REQUIRE(ex.excitable);
    CHECK(ex.x_M > 4.5);
    CHECK(ex.x_M < 5.0);
    CHECK(ex.x_f > 2.0);
    CHECK(ex.x_f < 3.0);
    // Extremes sit on the nullclines: y_M = x_M - 1 and y_f = 2 x_f^2.
    CHECK(ex.y_M == Approx(ex.x_M - 1.0).margin(1e-8));
    CHECK(ex.y_f == Approx(2.0 * ex.x_f * ex.x_f).margin(1e-7));

    const SegmentDecomposition dec = decompose_segments(sys, {4.0, 0.0}, ex.x_f);
    REQUIRE(dec.segments.size() == 2);
    CHECK(dec.breakpoints()[1] == Approx(ex.x_M).margin(1e-9));
    double sum = 0.0;
    for (const GraphSegment& g : dec.segments) sum += g.dt();
    CHECK(sum == Approx(dec.passage_time).margin(1e-12));

    // Independent run with only the terminal event.
    IntegrationOptions io;
    io.events = {{EventKind::x_equals, ex.x_f, true, 0, Termination::event_target}};
    const Trajectory direct = integrate(sys, {4.0, 0.0}, io);
    CHECK(direct.t_end() == Approx(sum).margin(1e-9));

    // phi_1 strictly monotone on each segment.
    for (const GraphSegment& g : dec.segments) {
        const double sign = g.x_end > g.x_begin ? 1.0 : -1.0;
        double prev = dec.trajectory.eval(g.t_begin).x;
        for (int k = 1; k <= 200; ++k) {
            const double x = dec.trajectory.eval(g.t_begin + g.dt() * k / 200.0).x;
            CHECK(sign * (x - prev) > 0.0);
            prev = x;
        }
    }

    const SegmentDecomposition psi = decompose_segments(sys, {5.0, 30.0}, ex.x_f);
    const BoundReport b = passage_time_bounds(dec, psi);
    CHECK(b.C_r == 12.0);
    CHECK(b.C_f_endpoint == Approx(std::fabs(ex.x_f * ex.x_f / (1.0 + 2.0 * ex.x_f * ex.x_f) - ex.x_f)).epsilon(1e-6));
    CHECK(b.C_f_endpoint > 1.55);
    CHECK(b.C_f_endpoint < 2.53);
    CHECK(b.C_f >= b.C_f_endpoint);
    CHECK(b.lower_t_phi <= b.t_phi);
    CHECK(b.t_psi <= b.upper_t_psi);
}

TEST_CASE("decomposition edge cases", "[estimates]") {
    const PlanarSystem lin = PlanarSystem::from_matrix("lin", {-1.0, 0.0, 0.0, -2.0});
    const SegmentDecomposition d = decompose_segments(lin, {2.0, 1.0}, 1.0);
    CHECK(d.segments.size() == 1);
    CHECK(d.passage_time == Approx(std::log(2.0)).epsilon(1e-9));
    // On x' = -x the speed |f| = x ranges over [1, 2].
    CHECK(d.segments[0].sup_speed == Approx(2.0));
    CHECK(d.segments[0].inf_speed == Approx(1.0).epsilon(1e-9));

    try {
        (void)decompose_segments(lin, {2.0, 1.0}, 3.0);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("ranged over") != std::string::npos);
    }

    CHECK_FALSE(passage_time_bounds(d, d).condition);
    const SegmentDecomposition other = decompose_segments(lin, {2.0, 1.0}, 0.5);
    CHECK_THROWS_AS(passage_time_bounds(d, other), std::invalid_argument);
}

TEST_CASE("bounds bracket measured passage times", "[estimates][property]") {
    Sampler s(29);
    int checked = 0;
    for (int i = 0; i < 300 && checked < 100; ++i) {
        // Stable node with a nonnegative invariant quadrant: off-diagonals >= 0.
        const double a = -s.u(0.5, 3.0), d = -s.u(0.5, 3.0), b = s.u(0.0, 0.4), c = s.u(0.0, 0.4);
        if (a * d - b * c <= 0.0) continue;
        const PlanarSystem lin = PlanarSystem::from_matrix("lin", {a, b, c, d});
        const Vec2 r0{s.u(1.0, 3.0), s.u(0.0, 3.0)};
        const Vec2 p0{r0.x + s.u(0.0, 2.0), s.u(0.0, 3.0)};
        const double x_f = s.u(0.05, 0.9) * r0.x;
        try {
            const BoundReport rep =
                passage_time_bounds(decompose_segments(lin, r0, x_f), decompose_segments(lin, p0, x_f));
            ++checked;
            CHECK(rep.lower_t_phi <= rep.t_phi);
            CHECK(rep.t_psi <= rep.upper_t_psi);
            if (rep.condition) CHECK(rep.t_psi < rep.t_phi);
        } catch (const std::runtime_error&) {
            continue;
        }
    }
    CHECK(checked == 100);
}

TEST_CASE("ex2 closed-form condition", "[estimates]") {
    const PlanarSystem sys = builtin("ex2");
    const ReferenceExtremes ex = reference_extremes(sys, {4.0, 0.0});
    for (double dy : {0.5, 5.0, 50.0}) {
        const Example2Condition c =
            example2_tolerance_condition(sys, {4.0, 0.0}, {ex.x_M, ex.y_f + dy}, ex.x_M, ex.x_f, ex.y_f);
        CHECK(c.status == ConditionStatus::holds);
        CHECK(c.y_b > ex.y_f);
    }
    CHECK(example2_tolerance_condition(sys, {4.0, 0.0}, {4.5, ex.y_f}, ex.x_M, ex.x_f, ex.y_f).status ==
          ConditionStatus::inapplicable);
    CHECK(example2_tolerance_condition(sys, {4.0, 0.0}, {9.0, ex.y_f + 1.0}, ex.x_M, ex.x_f, ex.y_f).status ==
          ConditionStatus::fails);
    CHECK_THROWS_AS(example2_tolerance_condition(builtin("ex1"), {2.0, 0.5}, {3.0, 20.0}, 3.0, 1.0, 1.0),
                    std::invalid_argument);

    // Non-excitable reference (4, 10): x_M = x_r.
    const ReferenceExtremes nx = reference_extremes(sys, {4.0, 10.0});
    CHECK_FALSE(nx.excitable);
    CHECK(nx.x_M == 4.0);
}

TEST_CASE("ex2 right side decreases in y", "[estimates][property]") {
    Sampler s(41);
    for (int i = 0; i < 1000; ++i) {
        const double x_f = s.u(0.5, 3.0), x_p = x_f + s.u(0.01, 5.0), y = x_p + s.u(0.0, 50.0);
        CHECK(example2_rhs(y + 1.0, x_p, x_f) < example2_rhs(y, x_p, x_f));
    }
}

TEST_CASE("estimate conditions imply tolerance", "[estimates][property]") {
    const PlanarSystem sys = builtin("ex2");
    const Vec2 r0{4.0, 0.0};
    const ReferenceExtremes ex = reference_extremes(sys, r0);
    int holds = 0, bound_holds = 0;
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            const Vec2 p0{4.05 + 0.25 * i, ex.y_f + 0.5 + 8.0 * j};
            const EstimateReport rep = estimate(sys, r0, p0);
            REQUIRE(rep.example2.has_value());
            const bool a = rep.example2->status == ConditionStatus::holds;
            const bool b = rep.bounds && rep.bounds->condition;
            if (!a && !b) continue;
            holds += a;
            bound_holds += b;
            INFO("p0 = (" << p0.x << ", " << p0.y << ")");
            CHECK(detect_tolerance(sys, r0, p0).outcome == Outcome::tolerance);
        }
    }
    CHECK(holds > 10);
    CHECK(bound_holds > 0);
}

TEST_CASE("estimate json", "[estimates]") {
    const EstimateReport rep = estimate(builtin("ex2"), {4.0, 0.0}, {5.0, 20.0});
    const std::string j = rep.to_json();
    CHECK(j.find("\"lower_t_phi\"") != std::string::npos);
    CHECK(j.find("\"example2\"") != std::string::npos);
    const EstimateReport bad = estimate(builtin("ex2"), {4.0, 0.0}, {5.0, 20.0}, {9.0, {}});
    CHECK_FALSE(bad.bounds.has_value());
    CHECK(bad.bounds_error.find("ranged over") != std::string::npos);
}
