#include <catch2/catch_amalgamated.hpp>

#include "tolkit/linear.hpp"
#include "tolkit/tolerance.hpp"

#include <cmath>
#include <random>

using namespace tolkit;
using Catch::Approx;

namespace {

ToleranceVerdict verdict(const char* name, Vec2 r0, Vec2 p0, const ToleranceOptions& o = {}) {
    return detect_tolerance(builtin(name), r0, p0, o);
}

ToleranceOptions tight() {
    ToleranceOptions o;
    o.integration.rel_tol = 1e-10;
    o.integration.abs_tol = 1e-13;
    return o;
}

}  // namespace

TEST_CASE("ex2 verdicts against r0 = (4, 0)", "[tolerance]") {
    const Vec2 r0{4.0, 0.0};
    const ToleranceVerdict a = verdict("ex2", r0, {4.5, 5.0});
    CHECK(a.outcome == Outcome::tolerance);
    CHECK(a.t1 > 0.0);
    CHECK(a.tau > a.t1);
    CHECK(a.depth > 0.0);
    CHECK(verdict("ex2", r0, {4.5, 20.0}).outcome == Outcome::tolerance);
    CHECK(verdict("ex2", r0, {6.0, 10.0}).outcome == Outcome::tolerance);
    CHECK(verdict("ex2", r0, {7.0, 1.0}).outcome == Outcome::no_tolerance);
}

TEST_CASE("ex2 verdicts against r0 = (4, 10)", "[tolerance]") {
    const Vec2 r0{4.0, 10.0};
    CHECK(verdict("ex2", r0, {4.2, 2.0}).outcome == Outcome::no_tolerance);
    CHECK(verdict("ex2", r0, {6.0, 5.0}).outcome == Outcome::no_tolerance);
}

TEST_CASE("ex1 and ex3 verdicts", "[tolerance]") {
    CHECK(verdict("ex1", {2.0, 0.5}, {5.0, 1.0}).outcome == Outcome::no_tolerance);
    const ToleranceVerdict b = verdict("ex1", {2.0, 0.5}, {2.0, 0.0});
    CHECK(b.outcome == Outcome::tolerance);
    CHECK(b.t1 == 0.0);

    const ToleranceVerdict c = verdict("ex3", {0.5, 2.0}, {0.7, 4.0});
    CHECK(c.outcome == Outcome::tolerance);
    CHECK(c.t1 < c.tau);
    CHECK(c.tau < c.t2);
    CHECK(std::isfinite(c.t2));
    CHECK(verdict("ex3", {0.5, 2.0}, {0.7, 3.0}).outcome == Outcome::no_tolerance);
}

TEST_CASE("identical points", "[tolerance]") {
    const ToleranceVerdict v = verdict("ex2", {4.0, 0.0}, {4.0, 0.0});
    CHECK(v.outcome == Outcome::no_tolerance);
    CHECK(v.justification == Justification::analytic);
}

TEST_CASE("preconditions are enforced", "[tolerance]") {
    CHECK_THROWS_AS(verdict("ex2", {4.0, 0.0}, {3.0, 1.0}), PreconditionError);
    try {
        (void)verdict("ex2", {4.0, 0.0}, {3.0, 1.0});
    } catch (const PreconditionError& e) {
        CHECK(e.assumption() == "A3");
    }
    CHECK_THROWS_AS(verdict("ex2", {4.0, 0.0}, {5.0, -1.0}), PreconditionError);
    // Saddle-type node.
    const PlanarSystem saddle = PlanarSystem::from_matrix("saddle", {-1.0, 0.0, 0.0, 1.0});
    CHECK_THROWS_AS(detect_tolerance(saddle, {1.0, 1.0}, {2.0, 1.0}), PreconditionError);
}

TEST_CASE("onset invariants", "[tolerance][property]") {
    const PlanarSystem sys = builtin("ex2");
    const struct {
        Vec2 r0, p0;
    } cases[] = {{{4.0, 0.0}, {4.5, 5.0}}, {{4.0, 0.0}, {4.5, 20.0}}, {{4.0, 0.0}, {6.0, 10.0}}};
    IntegrationOptions io;
    io.rel_tol = 1e-11;
    io.abs_tol = 1e-14;
    for (const auto& c : cases) {
        const ToleranceVerdict v = detect_tolerance(sys, c.r0, c.p0);
        REQUIRE(v.outcome == Outcome::tolerance);
        // Independent tighter run at the reported times.
        io.horizon = std::isfinite(v.t2) ? v.t2 + 1.0 : v.tau + 1.0;
        const Trajectory phi = integrate(sys, c.r0, io);
        const Trajectory psi = integrate(sys, c.p0, io);
        CHECK(psi.eval(v.tau).x < phi.eval(v.tau).x);
        CHECK(phi.eval(v.tau).x - psi.eval(v.tau).x == Approx(v.depth).epsilon(1e-5));
        if (v.t1 > 0.0) {
            const Vec2 a = phi.eval(v.t1), b = psi.eval(v.t1);
            CHECK(std::fabs(a.x - b.x) <= 1e-8);
            // At first contact psi_1 must not be rising faster than phi_1.
            CHECK(sys.field(b).value.x <= sys.field(a).value.x + 1e-8);
        }
    }
}

TEST_CASE("verdicts are stable under tighter tolerances", "[tolerance][property]") {
    const struct {
        const char* name;
        Vec2 r0, p0;
    } cases[] = {
        {"ex2", {4.0, 0.0}, {4.5, 5.0}},  {"ex2", {4.0, 0.0}, {7.0, 1.0}}, {"ex2", {4.0, 10.0}, {4.2, 2.0}},
        {"ex1", {2.0, 0.5}, {5.0, 1.0}},  {"ex3", {0.5, 2.0}, {0.7, 4.0}}, {"ex3", {0.5, 2.0}, {0.7, 3.0}},
    };
    for (const auto& c : cases) {
        INFO(c.name << " p0 = (" << c.p0.x << ", " << c.p0.y << ")");
        const ToleranceVerdict a = verdict(c.name, c.r0, c.p0);
        const ToleranceVerdict b = verdict(c.name, c.r0, c.p0, tight());
        CHECK(a.outcome == b.outcome);
        if (a.outcome == Outcome::tolerance) {
            CHECK(a.t1 == Approx(b.t1).margin(1e-6));
            CHECK(a.tau == Approx(b.tau).margin(1e-4));
        }
    }
}

TEST_CASE("group property", "[tolerance]") {
    const PlanarSystem sys = builtin("ex1");
    const Vec2 r0{2.0, 0.5};
    IntegrationOptions io;
    io.direction = Direction::backward;
    io.horizon = 0.5;
    const Trajectory back = integrate(sys, r0, io);
    REQUIRE(back.t_end() == Approx(-0.5));
    const Vec2 p0 = back.final_point();
    CHECK(check_group_property_no_tolerance(sys, r0, p0));
    CHECK_FALSE(check_group_property_no_tolerance(sys, r0, p0 + Vec2{0.1, 0.0}));
    CHECK_FALSE(check_group_property_no_tolerance(builtin("ex2"), {4.0, 0.0}, {4.5, 5.0}));

    ToleranceOptions o;
    o.use_group_property = true;
    const ToleranceVerdict v = detect_tolerance(sys, r0, p0, o);
    CHECK(v.outcome == Outcome::no_tolerance);
    CHECK(v.justification == Justification::group_property);
    // Without the shortcut the numerical scan agrees.
    CHECK(detect_tolerance(sys, r0, p0).outcome == Outcome::no_tolerance);
}

TEST_CASE("robustness balls", "[tolerance]") {
    const PlanarSystem sys = builtin("ex2");
    for (Vec2 p0 : {Vec2{4.5, 5.0}, Vec2{4.5, 20.0}}) {
        const ToleranceVerdict v = detect_tolerance(sys, {4.0, 0.0}, p0);
        const RobustnessReport r = robustness_balls(sys, {4.0, 0.0}, p0, v, 20, 1e-3, 5);
        CHECK(r.fraction == 1.0);
        CHECK(r.halvings == 0);
        const RobustnessReport z = robustness_balls(sys, {4.0, 0.0}, p0, v, 20, 0.0);
        CHECK(z.fraction == 1.0);
    }
    const ToleranceVerdict n = detect_tolerance(sys, {4.0, 0.0}, {7.0, 1.0});
    CHECK_THROWS_AS(robustness_balls(sys, {4.0, 0.0}, {7.0, 1.0}, n, 10, 1e-3), std::invalid_argument);
}

TEST_CASE("tail report uses the node eigenvalues", "[tolerance]") {
    const ToleranceVerdict v = verdict("ex2", {4.0, 0.0}, {7.0, 1.0});
    REQUIRE(v.tail.used);
    CHECK(v.tail.slow_rate == Approx(-0.5));
    CHECK(v.tail.fast_rate == Approx(-1.0));
    // The slow eigenvector of ex2 is vertical, so x decays at the fast rate.
    CHECK_FALSE(v.tail.slow_mode_visible);
    CHECK(v.tail.sign_at_infinity > 0);
    CHECK(v.tail.psi_amplitude > v.tail.phi_amplitude);
}

TEST_CASE("linear systems agree with the closed form", "[tolerance][property]") {
    {
        const PlanarSystem sys = PlanarSystem::from_matrix("lin", {-2.0, 1.0, 0.0, -1.0});
        const ToleranceVerdict v = detect_tolerance(sys, {1.0, 1.0}, {2.0, 0.5});
        REQUIRE(v.outcome == Outcome::tolerance);
        CHECK(v.t1 == Approx(std::log(3.0)).epsilon(1e-7));
        CHECK(std::isinf(v.t2));
    }
    {
        const PlanarSystem sys = PlanarSystem::from_matrix("defective", {-2.0, 1.0, -1.0, 0.0});
        const ToleranceVerdict v = detect_tolerance(sys, {1.0, 2.0}, {1.5, 1.6});
        REQUIRE(v.outcome == Outcome::tolerance);
        CHECK(v.t1 == Approx(5.0 / 9.0).epsilon(1e-7));
        // phi_1 - psi_1 = e^{-t}(0.9 t - 0.5) peaks at t = 14/9.
        CHECK(v.tau == Approx(14.0 / 9.0).epsilon(1e-6));
        CHECK(v.depth == Approx(0.9 * std::exp(-14.0 / 9.0)).epsilon(1e-7));
    }

    std::mt19937_64 rng(41);
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    int compared = 0;
    for (int i = 0; i < 150; ++i) {
        const double l1 = -u(0.2, 1.5), l2 = l1 - u(0.3, 2.0);
        const double v2 = u(-1.0, 3.0), w2 = u(-1.0, 3.0);
        if (std::fabs(v2 - w2) < 0.2) continue;
        // A = P diag(l1, l2) P^-1 with P = [(1, v2) (1, w2)].
        const double det = w2 - v2;
        const Mat2 m{(l1 * w2 - l2 * v2) / det, (l2 - l1) / det, v2 * w2 * (l1 - l2) / det, (l2 * w2 - l1 * v2) / det};
        const LinearAnalysis an = analyze(m);
        const PlanarSystem sys = PlanarSystem::from_matrix("rand", m);
        const Vec2 r0{u(0.2, 2.0), u(0.0, 2.0)};
        const Vec2 p0{r0.x + u(0.0, 2.0), u(0.0, 3.0)};
        LinearVerdict lv;
        try {
            lv = verdict_linear(an, r0, p0);
        } catch (const PreconditionError&) {
            continue;
        }
        if (lv.outcome == LinearOutcome::degenerate_tie) continue;
        // Skip pairs whose dip is too shallow to resolve numerically.
        double peak = 0.0;
        if (lv.outcome == LinearOutcome::yes_after) {
            for (int k = 0; k < 4000; ++k) {
                const double t = lv.onset + 60.0 / std::fabs(l1) * k / 4000.0;
                const double s = std::fabs(an.flow(r0, t).x) + 1e-300;
                peak = std::max(peak, linear_difference(an, r0, p0, t) / s);
            }
            if (peak < 1e-4) continue;
        }
        ToleranceVerdict nv;
        try {
            nv = detect_tolerance(sys, r0, p0);
        } catch (const PreconditionError&) {
            continue;
        }
        if (nv.outcome == Outcome::inconclusive) continue;
        INFO("A = " << m.a << " " << m.b << " " << m.c << " " << m.d << " r0 = " << r0.x << "," << r0.y
                    << " p0 = " << p0.x << "," << p0.y);
        CHECK((nv.outcome == Outcome::tolerance) == (lv.outcome == LinearOutcome::yes_after));
        if (nv.outcome == Outcome::tolerance && lv.outcome == LinearOutcome::yes_after && lv.onset > 0.0) {
            CHECK(nv.t1 == Approx(lv.onset).margin(1e-5));
        }
        ++compared;
    }
    CHECK(compared > 40);
}

TEST_CASE("verdict json", "[tolerance]") {
    const std::string j = verdict("ex2", {4.0, 0.0}, {7.0, 1.0}).to_json();
    CHECK(j.find("\"outcome\"") != std::string::npos);
    CHECK(j.find("null") != std::string::npos);
    const std::string t = verdict("ex3", {0.5, 2.0}, {0.7, 4.0}).to_json();
    CHECK(t.find("\"tau\"") != std::string::npos);
}
