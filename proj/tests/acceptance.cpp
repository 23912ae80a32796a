// Acceptance gate: one PASS/FAIL line per criterion on stdout, details on stderr.
// Exit status is the number of failed criteria.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/fd_check.hpp"
#include "support/random_expr.hpp"
#include "tolkit/estimates.hpp"
#include "tolkit/expr.hpp"
#include "tolkit/geometry.hpp"
#include "tolkit/integrate.hpp"
#include "tolkit/linear.hpp"
#include "tolkit/system.hpp"
#include "tolkit/tolerance.hpp"

using namespace tolkit;

namespace {

constexpr double kLandmarkTol = 0.1;
constexpr double kFixedPointTol = 0.01;
constexpr double kLinearRelTol = 1e-6;
constexpr double kDeltaTol = 1e-10;
constexpr double kDerivativeTol = 1e-5;
constexpr double kClosedFormTol = 1e-9;

struct Line {
    bool pass = false;
    std::string detail;
};

struct Sampler {
    std::mt19937_64 rng;
    explicit Sampler(std::uint64_t seed) : rng(seed) {}
    double u(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

std::string str(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string pt(Vec2 p) { return "(" + str(p.x) + ", " + str(p.y) + ")"; }

Line criterion1() {
    struct Case {
        const char* sys;
        Vec2 r0, p0;
        Outcome expected;
    };
    const Case cases[] = {
        {"ex2", {4.0, 0.0}, {4.5, 5.0}, Outcome::tolerance},
        {"ex2", {4.0, 0.0}, {4.5, 20.0}, Outcome::tolerance},
        {"ex2", {4.0, 0.0}, {6.0, 10.0}, Outcome::tolerance},
        {"ex2", {4.0, 0.0}, {7.0, 1.0}, Outcome::no_tolerance},
        {"ex2", {4.0, 10.0}, {4.2, 2.0}, Outcome::no_tolerance},
        {"ex2", {4.0, 10.0}, {5.0, 25.0}, Outcome::tolerance},
        {"ex2", {4.0, 10.0}, {6.0, 5.0}, Outcome::no_tolerance},
        {"ex1", {2.0, 0.5}, {5.0, 1.0}, Outcome::no_tolerance},
        {"ex1", {2.0, 0.5}, {2.0, 0.0}, Outcome::tolerance},
        {"ex1", {2.0, 0.5}, {2.2, 0.2}, Outcome::no_tolerance},
        {"ex3", {0.5, 2.0}, {0.7, 4.0}, Outcome::tolerance},
        {"ex3", {0.5, 2.0}, {0.7, 3.0}, Outcome::no_tolerance},
    };
    const auto start = std::chrono::steady_clock::now();
    int ok = 0;
    std::string misses;
    for (const Case& c : cases) {
        std::string got;
        try {
            const ToleranceVerdict v = detect_tolerance(builtin(c.sys), c.r0, c.p0);
            got = to_string(v.outcome);
            if (v.outcome == c.expected) {
                ++ok;
            } else {
                std::fprintf(stderr, "  c1 %s r0=%s p0=%s expected %s got %s (t1=%s depth=%s margin=%s)\n", c.sys,
                             pt(c.r0).c_str(), pt(c.p0).c_str(), to_string(c.expected), got.c_str(),
                             str(v.t1).c_str(), str(v.depth).c_str(), str(v.margin).c_str());
            }
        } catch (const std::exception& e) {
            got = std::string("error: ") + e.what();
            std::fprintf(stderr, "  c1 %s p0=%s %s\n", c.sys, pt(c.p0).c_str(), got.c_str());
        }
        if (got != to_string(c.expected)) misses += " " + std::string(c.sys) + pt(c.p0) + "->" + got + ";";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const int n = static_cast<int>(std::size(cases));
    return {ok == n && secs < 30.0,
            std::to_string(ok) + "/" + std::to_string(n) + " verdicts match in " + str(secs) + " s" +
                (misses.empty() ? "" : "; mismatches:" + misses)};
}

Line criterion2() {
    struct Case {
        const char* sys;
        Vec2 p;
        double expected;
    };
    const Case cases[] = {{"ex2", {4.0, 3.0}, 3.4}, {"ex2", {4.0, 10.0}, 4.0}, {"ex1", {2.0, 0.5}, 2.5},
                          {"ex3", {0.5, 0.5}, 1.0}};
    bool pass = true;
    std::string d;
    for (const Case& c : cases) {
        const Trajectory tr = integrate_backward_to_axis(builtin(c.sys), c.p);
        const bool hit = tr.termination() == Termination::axis_crossing;
        const double xhat = tr.final_point().x;
        const bool ok = hit && std::fabs(xhat - c.expected) <= kLandmarkTol;
        pass = pass && ok;
        d += std::string(c.sys) + pt(c.p) + " x^=" + (hit ? str(xhat) : std::string("none")) + (ok ? "" : "!") + " ";
    }
    return {pass, d};
}

Line criterion3() {
    FixedPointSearch search;
    search.box = {-0.1, 2.5, -0.1, 2.5};
    search.grid = 16;
    const std::vector<FixedPointReport> found = find_fixed_points(builtin("ex3"), search);
    struct Expect {
        Vec2 at;
        FixedPointClass kind;
    };
    const Expect expected[] = {{{0.0, 0.0}, FixedPointClass::stable_node},
                               {{0.72, 0.72}, FixedPointClass::saddle},
                               {{1.4, 1.4}, FixedPointClass::stable_spiral}};
    bool pass = found.size() == 3;
    std::string d = std::to_string(found.size()) + " found:";
    for (const Expect& e : expected) {
        const FixedPointReport* best = nullptr;
        for (const auto& r : found) {
            if (best == nullptr || distance(r.location, e.at) < distance(best->location, e.at)) best = &r;
        }
        const bool ok = best != nullptr && std::fabs(best->location.x - e.at.x) <= kFixedPointTol &&
                        std::fabs(best->location.y - e.at.y) <= kFixedPointTol && best->classification == e.kind;
        pass = pass && ok;
        if (best != nullptr) d += " " + pt(best->location) + " " + to_string(best->classification) + (ok ? "" : "!");
    }
    return {pass, d};
}

Line criterion4() {
    const PlanarSystem sys = builtin("ex2");
    const Vec2 r0{4.0, 0.0};
    const double f_r = sys.f().eval(4.0, 0.0).value;
    const EstimateReport rep = estimate(sys, r0, {4.5, 20.0});
    if (!rep.bounds) return {false, "no bound report: " + rep.bounds_error};
    const BoundReport& b = *rep.bounds;
    const ReferenceExtremes& ex = rep.extremes;
    const bool c_r = f_r == 12.0 && b.C_r == 12.0;
    const bool x_m = ex.x_M > 4.5 && ex.x_M < 5.0;
    const bool x_f = ex.x_f > 2.0 && ex.x_f < 3.0;
    const bool c_f = b.C_f_endpoint > 1.55 && b.C_f_endpoint < 2.53;
    return {c_r && x_m && x_f && c_f, "C_r=" + str(b.C_r) + " x_M=" + str(ex.x_M) + " x_f=" + str(ex.x_f) +
                                          " C_f=|f(x_f,y_f)|=" + str(b.C_f_endpoint) +
                                          " (sampled sup on the last segment " + str(b.C_f) + ")"};
}

Line criterion5() {
    Sampler s(5);
    int instances = 0, conclusive = 0, agree = 0, yes = 0, draws = 0;
    double worst = 0.0;
    const auto start = std::chrono::steady_clock::now();
    while (instances < 500 && draws < 100000) {
        ++draws;
        // A = P diag(l1, l2) P^-1 with P = [(1, v2) (1, w2)], real negative eigenvalues.
        const double l1 = -s.u(0.2, 1.5), l2 = l1 - s.u(0.3, 2.0);
        const double v2 = s.u(-1.0, 3.0), w2 = s.u(-1.0, 3.0);
        if (std::fabs(v2 - w2) < 0.2) continue;
        const double det = w2 - v2;
        const Mat2 m{(l1 * w2 - l2 * v2) / det, (l2 - l1) / det, v2 * w2 * (l1 - l2) / det,
                     (l2 * w2 - l1 * v2) / det};
        const Vec2 r0{s.u(0.2, 2.0), s.u(0.0, 2.0)};
        const Vec2 p0{r0.x + s.u(0.0, 2.0), s.u(0.0, 3.0)};
        LinearVerdict lv;
        ToleranceVerdict nv;
        const LinearAnalysis an = analyze(m);
        try {
            lv = verdict_linear(an, r0, p0);
            nv = detect_tolerance(PlanarSystem::from_matrix("rand", m), r0, p0);
        } catch (const PreconditionError&) {
            continue;  // pair not admissible
        }
        ++instances;
        if (lv.outcome == LinearOutcome::degenerate_tie || nv.outcome == Outcome::inconclusive) continue;
        ++conclusive;
        const bool analytic_yes = lv.outcome == LinearOutcome::yes_after;
        bool ok = analytic_yes == (nv.outcome == Outcome::tolerance);
        if (ok && analytic_yes) {
            ++yes;
            const double rel = std::fabs(lv.onset - nv.t1) / lv.onset;
            worst = std::max(worst, std::isnan(rel) ? INFINITY : rel);
            ok = rel <= kLinearRelTol;
        }
        if (ok) {
            ++agree;
        } else {
            std::fprintf(stderr, "  c5 A=(%g,%g,%g,%g) r0=%s p0=%s analytic %s T=%s numeric %s t1=%s\n", m.a, m.b,
                         m.c, m.d, pt(r0).c_str(), pt(p0).c_str(), to_string(lv.outcome), str(lv.onset).c_str(),
                         to_string(nv.outcome), str(nv.t1).c_str());
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {instances == 500 && agree == conclusive && secs < 120.0,
            std::to_string(agree) + "/" + std::to_string(conclusive) + " conclusive agree (" + std::to_string(yes) +
                " yes-after, worst |dT|/T " + str(worst) + ") over " + std::to_string(instances) + " matrices in " +
                str(secs) + " s"};
}

Line criterion6() {
    Sampler s(6);
    const PlanarSystem ex2 = builtin("ex2");
    const Vec2 r0{4.0, 0.0};
    const CandidateClassifier cls(ex2, r0);
    if (!cls.loop() || !cls.strip()) return {false, "T or T-hat missing for ex2"};
    const LoopRegion& t = *cls.loop();
    const StripRegion& strip = *cls.strip();
    if (!strip.check().f_nonpositive) return {false, "T-hat failed its f <= 0 check"};
    int t_ok = 0, s_ok = 0, n_t = 0, n_s = 0;
    while (n_t < 200) {
        const Vec2 p{s.u(r0.x, t.xmax()), s.u(0.0, t.top())};
        if (!t.contains(p)) continue;
        ++n_t;
        if (detect_tolerance(ex2, r0, p).outcome == Outcome::tolerance) {
            ++t_ok;
        } else {
            std::fprintf(stderr, "  c6 T sample %s not tolerance\n", pt(p).c_str());
        }
    }
    while (n_s < 200) {
        const Vec2 p{s.u(strip.x_lo(), strip.x_hi()), s.u(strip.y_lo(), strip.y_lo() + 40.0)};
        if (!strip.contains(p)) continue;
        ++n_s;
        if (detect_tolerance(ex2, r0, p).outcome == Outcome::tolerance) {
            ++s_ok;
        } else {
            std::fprintf(stderr, "  c6 T-hat sample %s not tolerance\n", pt(p).c_str());
        }
    }

    struct Config {
        const char* name;
        Vec2 r0;
        double xmax, ymax;
    };
    const Config configs[] = {{"ex1", {2.0, 0.5}, 7.0, 4.0}, {"ex3", {0.5, 0.5}, 1.0, 1.0}};
    int impossible = 0, violations = 0, tries = 0;
    const int per_config = 100;
    for (const Config& c : configs) {
        const PlanarSystem sys = builtin(c.name);
        const CandidateClassifier ic(sys, c.r0);
        int here = 0;
        while (here < per_config && tries < 200000) {
            ++tries;
            const Vec2 p{s.u(c.r0.x, c.xmax), s.u(0.0, c.ymax)};
            Prediction pr;
            try {
                pr = ic.classify(p);
            } catch (const PreconditionError&) {
                continue;
            }
            if (pr.kind != PredictionKind::impossible) continue;
            ++here;
            ToleranceVerdict v;
            try {
                v = detect_tolerance(sys, c.r0, p);
            } catch (const PreconditionError&) {
                continue;
            }
            if (v.outcome == Outcome::tolerance) {
                ++violations;
                std::fprintf(stderr, "  c6 %s impossible sample %s simulates to tolerance (%s)\n", c.name,
                             pt(p).c_str(), pr.rule.c_str());
            }
        }
        impossible += here;
    }
    return {t_ok == 200 && s_ok == 200 && impossible == 2 * per_config && violations == 0,
            "T " + std::to_string(t_ok) + "/200, T-hat " + std::to_string(s_ok) + "/200, impossible " +
                std::to_string(impossible) + " samples with " + std::to_string(violations) + " tolerance outcomes"};
}

double quadrature_delta(double w, double a, double b) {
    // Factored integrand: u^2/c - u loses digits near the pole u = c.
    const double c = 1.0 + w;
    auto f = [c](double u) { return c / (u * (u - c)); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

Line criterion7() {
    Sampler s(7);
    int n = 0;
    double worst = 0.0;
    while (n < 1000) {
        const double w = s.u(0.0, 30.0), a = s.u(0.1, 40.0), b = s.u(0.1, 40.0);
        // Valid triples keep the pole u = 1 + w outside [a, b].
        const double c = 1.0 + w;
        if (c >= std::min(a, b) - 1e-3 && c <= std::max(a, b) + 1e-3) continue;
        ++n;
        const double err = std::fabs(delta_fn(w, a, b) - quadrature_delta(w, a, b));
        worst = std::max(worst, err);
        if (err > kDeltaTol) std::fprintf(stderr, "  c7 w=%.17g a=%.17g b=%.17g err=%g\n", w, a, b, err);
    }
    return {worst <= kDeltaTol, "1000 triples, worst |closed form - quadrature| " + str(worst)};
}

Line criterion8() {
    const PlanarSystem sys = builtin("ex2");
    const Vec2 r0{4.0, 0.0};
    const ReferenceExtremes ex = reference_extremes(sys, r0);
    int holds = 0, tolerant = 0;
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            const Vec2 p0{4.1 + 0.15 * i, ex.y_f + 0.5 + 5.0 * j};
            const Example2Condition c = example2_tolerance_condition(sys, r0, p0, ex.x_M, ex.x_f, ex.y_f);
            if (c.status != ConditionStatus::holds) continue;
            ++holds;
            if (detect_tolerance(sys, r0, p0).outcome == Outcome::tolerance) {
                ++tolerant;
            } else {
                std::fprintf(stderr, "  c8 condition holds at %s without tolerance\n", pt(p0).c_str());
            }
        }
    }

    Sampler s(8);
    int instances = 0, ordered = 0, draws = 0;
    while (instances < 100 && draws < 5000) {
        ++draws;
        const Vec2 p0{s.u(4.05, 7.0), s.u(ex.y_f + 0.5, 100.0)};
        const EstimateReport rep = estimate(sys, r0, p0);
        if (!rep.bounds) continue;
        ++instances;
        const BoundReport& b = *rep.bounds;
        if (b.lower_t_phi <= b.t_phi && b.t_psi <= b.upper_t_psi) {
            ++ordered;
        } else {
            std::fprintf(stderr, "  c8 bound order fails at %s: %g <= %g, %g <= %g\n", pt(p0).c_str(), b.lower_t_phi,
                         b.t_phi, b.t_psi, b.upper_t_psi);
        }
    }
    return {holds > 0 && tolerant == holds && instances == 100 && ordered == instances,
            "condition holds at " + std::to_string(holds) + "/400 grid points, " + std::to_string(tolerant) +
                " tolerant; bound order " + std::to_string(ordered) + "/" + std::to_string(instances)};
}

Line criterion9() {
    tolkit_test::RandomExprGen gen(9);
    int expressions = 0, usable = 0;
    double worst = 0.0;
    while (expressions < 1000) {
        const Expr e = parse_expr(gen.make(3));
        const Var v = expressions % 2 == 0 ? Var::x : Var::y;
        const Expr de = differentiate(e, v);
        bool any = false;
        for (int k = 0; k < 8 && !any; ++k) {
            const auto cmp = tolkit_test::compare_with_fd(e, de, v, gen.uniform(0.1, 2.0), gen.uniform(0.1, 2.0));
            if (!cmp.usable) continue;
            any = true;
            worst = std::max(worst, cmp.rel_error);
        }
        ++expressions;
        usable += any;
    }
    return {usable == 1000 && worst <= kDerivativeTol,
            std::to_string(usable) + "/1000 expressions compared, worst relative error " + str(worst)};
}

Line criterion10() {
    const Mat2 a{-2.0, 1.0, -1.0, 0.0};
    const Vec2 r0{1.0, 2.0}, p0{1.5, 1.6};
    // Closed form: x1(t) = e^{-t} (x0 + t (y0 - x0)) since A + I is nilpotent.
    const auto diff = [&](double t) {
        const double phi = std::exp(-t) * (r0.x + t * (r0.y - r0.x));
        const double psi = std::exp(-t) * (p0.x + t * (p0.y - p0.x));
        return phi - psi;
    };
    const LinearVerdict lv = verdict_linear(analyze(a), r0, p0);
    const ToleranceVerdict nv = detect_tolerance(PlanarSystem::from_matrix("2b", a), r0, p0);

    // Dense search for the maximum of the closed-form difference, then golden refinement.
    double t_best = 0.0, best = -INFINITY;
    for (int k = 0; k <= 200000; ++k) {
        const double t = 20.0 * k / 200000.0;
        if (diff(t) > best) {
            best = diff(t);
            t_best = t;
        }
    }
    double lo = std::max(0.0, t_best - 1e-4), hi = t_best + 1e-4;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int k = 0; k < 200; ++k) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (diff(m1) < diff(m2)) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    t_best = 0.5 * (lo + hi);
    best = diff(t_best);

    const double target_max = 0.9 / std::exp(1.0);
    const bool onset = lv.outcome == LinearOutcome::yes_after && std::fabs(lv.onset - 5.0 / 9.0) <= kClosedFormTol &&
                       nv.outcome == Outcome::tolerance && std::fabs(nv.t1 - 5.0 / 9.0) <= kClosedFormTol;
    const bool max_value = std::fabs(best - target_max) <= kClosedFormTol;
    const bool max_time = std::fabs(t_best - 1.0) <= kClosedFormTol;
    return {onset && max_value && max_time,
            "onset analytic " + str(lv.onset) + " numeric " + str(nv.t1) + " (5/9 = " + str(5.0 / 9.0) +
                "); max of phi_1 - psi_1 is " + str(best) + " at t = " + str(t_best) + " (numeric depth " +
                str(nv.depth) + " at " + str(nv.tau) + "), expected 0.9/e = " + str(target_max) +
                " at t = 1; the bound (c2 - d2) t e^{-t} peaks at " + str(lv.max_depth) + " at t = " +
                str(lv.max_depth_time)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Line()>>> criteria = {
        {"figure-caption verdict suite", criterion1},
        {"backward-flow landmarks", criterion2},
        {"ex3 fixed-point inventory", criterion3},
        {"ex2 excitability constants", criterion4},
        {"linear closed form vs numeric", criterion5},
        {"region soundness", criterion6},
        {"delta formula vs quadrature", criterion7},
        {"estimate soundness", criterion8},
        {"symbolic derivative vs finite differences", criterion9},
        {"case-2b onset and depth", criterion10},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Line line;
        try {
            line = criteria[k].second();
        } catch (const std::exception& e) {
            line = {false, std::string("exception: ") + e.what()};
        }
        failed += !line.pass;
        std::printf("%s %zu %s: %s\n", line.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, line.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
