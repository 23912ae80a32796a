#include "tolkit/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>
#include <json.hpp>

#include "tolkit/geometry.hpp"

namespace tolkit {

namespace {

constexpr int kSpeedSamples = 1024;
constexpr int kBrentBits = 40;
constexpr double kSameTerminal = 1e-12;

nlohmann::json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

nlohmann::json point_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

double abs_f(const PlanarSystem& sys, Vec2 p) {
    double v = 0.0;
    if (!sys.f_fast(p.x, p.y, v)) throw DomainError("f is undefined at (" + std::to_string(p.x) + ", " +
                                                    std::to_string(p.y) + ")");
    return std::fabs(v);
}

// Sampled extreme of |f| on [t0, t1], polished with Brent on the dense output.
void speed_extremes(const PlanarSystem& sys, const Trajectory& tr, GraphSegment& seg) {
    const double t0 = seg.t_begin, t1 = seg.t_end;
    const double h = (t1 - t0) / kSpeedSamples;
    std::size_t k_max = 0, k_min = 0;
    double v_max = -1.0, v_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kSpeedSamples; ++k) {
        const double v = abs_f(sys, tr.eval(t0 + h * k));
        if (v > v_max) v_max = v, k_max = static_cast<std::size_t>(k);
        if (v < v_min) v_min = v, k_min = static_cast<std::size_t>(k);
    }
    auto bracket = [&](std::size_t k) {
        const double a = t0 + h * (k == 0 ? 0.0 : static_cast<double>(k) - 1.0);
        const double b = std::min(t1, t0 + h * (static_cast<double>(k) + 1.0));
        return std::pair{a, b};
    };
    {
        const auto [a, b] = bracket(k_max);
        const auto r = boost::math::tools::brent_find_minima(
            [&](double t) { return -abs_f(sys, tr.eval(t)); }, a, b, kBrentBits);
        seg.sup_speed = std::max(v_max, -r.second);
        seg.sup_at = tr.eval(-r.second >= v_max ? r.first : t0 + h * static_cast<double>(k_max));
    }
    {
        const auto [a, b] = bracket(k_min);
        const auto r = boost::math::tools::brent_find_minima([&](double t) { return abs_f(sys, tr.eval(t)); }, a, b,
                                                             kBrentBits);
        seg.inf_speed = std::min(v_min, r.second);
        seg.inf_at = tr.eval(r.second <= v_min ? r.first : t0 + h * static_cast<double>(k_min));
    }
}

nlohmann::json segment_json(const GraphSegment& s) {
    return {{"x", {s.x_begin, s.x_end}}, {"t", {s.t_begin, s.t_end}},        {"dt", s.dt()},
            {"sup_f", s.sup_speed},     {"sup_at", point_json(s.sup_at)}, {"inf_f", s.inf_speed},
            {"inf_at", point_json(s.inf_at)}, {"end_f", s.end_speed}};
}

nlohmann::json decomposition_json(const SegmentDecomposition& d) {
    nlohmann::json segs = nlohmann::json::array();
    for (const GraphSegment& s : d.segments) segs.push_back(segment_json(s));
    return {{"start", point_json(d.start)},
            {"x_f", d.x_f},
            {"end", point_json(d.end)},
            {"passage_time", d.passage_time},
            {"breakpoints", d.breakpoints()},
            {"segments", segs}};
}

nlohmann::json bounds_json(const BoundReport& b) {
    nlohmann::json j;
    j["lower_t_phi"] = number_or_null(b.lower_t_phi);
    j["upper_t_psi"] = number_or_null(b.upper_t_psi);
    j["t_phi"] = b.t_phi;
    j["t_psi"] = b.t_psi;
    j["condition"] = b.condition;
    j["unbounded"] = b.unbounded;
    if (!b.flag.empty()) j["flag"] = b.flag;
    j["xhat_M"] = b.xhat_M ? nlohmann::json(*b.xhat_M) : nlohmann::json(nullptr);
    j["C_r"] = number_or_null(b.C_r);
    j["C_f"] = number_or_null(b.C_f);
    j["C_f_endpoint"] = number_or_null(b.C_f_endpoint);
    j["C_psi"] = number_or_null(b.C_psi);
    j["x_r"] = b.x_r;
    j["x_p"] = b.x_p;
    j["M"] = point_json({b.x_M, b.y_M});
    j["f"] = point_json({b.x_f, b.y_f});
    return j;
}

nlohmann::json example2_json(const Example2Condition& c) {
    nlohmann::json j;
    j["status"] = to_string(c.status);
    if (!c.reason.empty()) j["reason"] = c.reason;
    j["lhs"] = number_or_null(c.lhs);
    j["rhs"] = number_or_null(c.rhs);
    j["y_b"] = number_or_null(c.y_b);
    j["x_M"] = c.x_M;
    j["x_f"] = c.x_f;
    j["y_f"] = c.y_f;
    return j;
}

Example2Condition inapplicable(Example2Condition c, std::string reason) {
    c.status = ConditionStatus::inapplicable;
    c.reason = std::move(reason);
    return c;
}

}  // namespace

std::vector<double> SegmentDecomposition::breakpoints() const {
    std::vector<double> out;
    if (segments.empty()) return out;
    out.push_back(segments.front().x_begin);
    for (const GraphSegment& s : segments) out.push_back(s.x_end);
    return out;
}

std::string SegmentDecomposition::to_json() const { return decomposition_json(*this).dump(2); }

SegmentDecomposition decompose_segments(const PlanarSystem& sys, Vec2 start, double x_f,
                                        const IntegrationOptions& opts) {
    IntegrationOptions io = opts;
    io.direction = Direction::forward;
    io.stop_at_ball = true;
    io.ball_center = sys.node();
    io.quadrant_guard = true;
    io.detect_stall = true;
    io.events = {
        {EventKind::f_sign_change, 0.0, false, 0, Termination::event_target},
        {EventKind::x_equals, x_f, true, 0, Termination::event_target},
    };
    SegmentDecomposition dec;
    dec.start = start;
    dec.x_f = x_f;
    dec.trajectory = integrate(sys, start, io);
    const Trajectory& tr = dec.trajectory;

    const Event* terminal = nullptr;
    for (const Event& e : tr.events()) {
        if (e.kind == EventKind::x_equals) terminal = &e;
    }
    if (terminal == nullptr || tr.termination() != Termination::event_target) {
        const auto [lo, hi] = std::minmax_element(tr.xs().begin(), tr.xs().end());
        std::ostringstream msg;
        msg << "x_f = " << x_f << " is never attained from (" << start.x << ", " << start.y << "); x ranged over ["
            << *lo << ", " << *hi << "] before " << to_string(tr.termination());
        throw std::runtime_error(msg.str());
    }

    dec.passage_time = terminal->time;
    dec.end = terminal->point;
    double t_prev = 0.0, x_prev = start.x;
    auto close_segment = [&](double t, double x) {
        GraphSegment s;
        s.t_begin = t_prev;
        s.t_end = t;
        s.x_begin = x_prev;
        s.x_end = x;
        speed_extremes(sys, tr, s);
        s.end_speed = abs_f(sys, tr.eval(t));
        dec.segments.push_back(s);
        t_prev = t;
        x_prev = x;
    };
    for (const Event& e : tr.events()) {
        if (e.kind != EventKind::f_sign_change || e.time >= dec.passage_time || e.time <= 0.0) continue;
        close_segment(e.time, e.point.x);
    }
    close_segment(dec.passage_time, x_f);
    return dec;
}

std::string BoundReport::to_json() const { return bounds_json(*this).dump(2); }

BoundReport passage_time_bounds(const SegmentDecomposition& phi, const SegmentDecomposition& psi) {
    if (std::fabs(phi.x_f - psi.x_f) > kSameTerminal * std::max(1.0, std::fabs(phi.x_f))) {
        throw std::invalid_argument("decompositions end at different x_f");
    }
    if (phi.segments.empty() || psi.segments.empty()) throw std::invalid_argument("empty decomposition");
    BoundReport b;
    b.t_phi = phi.passage_time;
    b.t_psi = psi.passage_time;
    b.x_r = phi.start.x;
    b.x_p = psi.start.x;
    b.x_f = phi.x_f;
    b.y_f = phi.end.y;

    for (const GraphSegment& s : phi.segments) {
        const double dx = std::fabs(s.x_end - s.x_begin);
        if (s.sup_speed > 0.0) b.lower_t_phi += dx / s.sup_speed;
    }
    for (const GraphSegment& s : psi.segments) {
        const double dx = std::fabs(s.x_end - s.x_begin);
        if (dx == 0.0) continue;
        if (s.inf_speed <= 0.0) {
            b.unbounded = true;
            b.flag = "inf |f| vanishes on a psi segment";
            b.upper_t_psi = std::numeric_limits<double>::infinity();
            break;
        }
        b.upper_t_psi += dx / s.inf_speed;
    }
    b.condition = !b.unbounded && b.upper_t_psi < b.lower_t_phi;

    b.C_r = phi.segments.front().sup_speed;
    b.C_psi = psi.segments.front().inf_speed;
    b.x_M = phi.start.x;
    b.y_M = phi.start.y;
    for (std::size_t i = 0; i + 1 < phi.segments.size(); ++i) {
        const GraphSegment& s = phi.segments[i];
        if (s.x_end > b.x_M) {
            b.x_M = s.x_end;
            b.y_M = phi.trajectory.eval(s.t_end).y;
        }
    }
    if (phi.segments.size() >= 2) {
        b.C_f = phi.segments.back().sup_speed;
        b.C_f_endpoint = phi.segments.back().end_speed;
    }
    if (phi.segments.size() == 2 && psi.segments.size() == 1 && b.C_psi > 0.0 && b.x_M > b.x_f) {
        b.xhat_M = expanded_bound_xhatM(b.C_r, b.C_f, b.C_psi, b.x_r, b.x_M, b.x_f);
    }
    return b;
}

double expanded_bound_xhatM(double C_r, double C_f, double C_psi, double x_r, double x_M, double x_f) {
    if (!(C_r > 0.0 && C_f > 0.0 && C_psi > 0.0)) throw std::invalid_argument("C_r, C_f, C_psi must be positive");
    if (!(x_M >= x_r)) throw std::invalid_argument("x_M must be at least x_r");
    if (!(x_M > x_f)) throw std::invalid_argument("x_M must exceed x_f");
    return x_M + (C_psi - C_f) / C_f * (x_M - x_f) + C_psi / C_r * (x_M - x_r);
}

double delta_fn(double w, double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("delta needs a, b > 0");
    const double c = 1.0 + w;
    if (!std::isfinite(c)) throw DomainError("delta needs finite w");
    if (a == b) return 0.0;
    if (c >= std::min(a, b) && c <= std::max(a, b)) {
        throw DomainError("integrand u^2/(1+w) - u vanishes at u = 1 + w inside [a, b]");
    }
    return std::log(std::fabs(c - b) / std::fabs(c - a)) + std::log(a / b);
}

const char* to_string(ConditionStatus s) {
    switch (s) {
        case ConditionStatus::holds:
            return "holds";
        case ConditionStatus::fails:
            return "fails";
        case ConditionStatus::inapplicable:
            return "inapplicable";
    }
    return "inapplicable";
}

std::string Example2Condition::to_json() const { return example2_json(*this).dump(2); }

double example2_rhs(double y, double x_p, double x_f) { return (1.0 + y - x_f) * x_p / (1.0 + y - x_p); }

Example2Condition example2_tolerance_condition(const PlanarSystem& sys, Vec2 r0, Vec2 p0, double x_M, double x_f,
                                               double y_f) {
    if (!sys.is_builtin() || sys.name() != "ex2") {
        throw std::invalid_argument("the closed-form condition encodes builtin ex2 only");
    }
    Example2Condition c;
    c.x_M = x_M;
    c.x_f = x_f;
    c.y_f = y_f;
    const double x_r = r0.x, y_r = r0.y, x_p = p0.x, y_p = p0.y;
    if (!(x_p > x_r)) return inapplicable(c, "needs x_p > x_r");
    if (!(y_p > y_f)) return inapplicable(c, "needs y_p > y_f");
    if (!(x_p > x_f)) return inapplicable(c, "needs x_p > x_f");

    // Dropping the absolute values needs each ratio positive.
    const double first = (x_M - 1.0 - y_r) / (x_r - 1.0 - y_r);
    const double second = (1.0 - x_f + y_f) / (1.0 - x_M + y_f);
    if (!(first > 0.0) || !std::isfinite(first)) return inapplicable(c, "(x_M-1-y_r)/(x_r-1-y_r) is not positive");
    if (!(second > 0.0) || !std::isfinite(second)) return inapplicable(c, "(1-x_f+y_f)/(1-x_M+y_f) is not positive");
    c.lhs = x_r * first * second;

    double d = 0.0;
    try {
        d = delta_fn(y_f, x_p, x_f);
    } catch (const DomainError& e) {
        return inapplicable(c, std::string("delta(y_f, x_p, x_f): ") + e.what());
    }
    c.y_b = y_f + (y_p - y_f) * std::exp(-d / 2.0);
    if (!(1.0 + c.y_b - x_f > 0.0)) return inapplicable(c, "1 + y_b - x_f is not positive");
    if (!(1.0 + c.y_b - x_p > 0.0)) return inapplicable(c, "1 + y_b - x_p is not positive");
    c.rhs = example2_rhs(c.y_b, x_p, x_f);
    if (!(c.lhs > 0.0)) return inapplicable(c, "left side is not positive");
    c.status = c.lhs > c.rhs ? ConditionStatus::holds : ConditionStatus::fails;
    return c;
}

ReferenceExtremes reference_extremes(const PlanarSystem& sys, Vec2 r0, const IntegrationOptions& opts) {
    const ExcitabilityReport rep = classify_excitable(sys, r0, opts);
    ReferenceExtremes ex;
    ex.excitable = rep.n >= 1;
    ex.x_M = ex.excitable ? rep.M : r0.x;
    ex.y_M = ex.excitable ? rep.y_at_tM : r0.y;
    ex.x_f = r0.x;
    ex.y_f = r0.y;
    for (const Event& e : rep.trajectory.events()) {
        if (e.kind == EventKind::g_sign_change && e.direction < 0 && e.point.y > ex.y_f) {
            ex.x_f = e.point.x;
            ex.y_f = e.point.y;
        }
    }
    return ex;
}

std::string EstimateReport::to_json() const {
    nlohmann::json j;
    j["r0"] = point_json(r0);
    j["p0"] = point_json(p0);
    j["reference"] = {{"excitable", extremes.excitable},
                      {"x_M", extremes.x_M},
                      {"y_M", extremes.y_M},
                      {"x_f", extremes.x_f},
                      {"y_f", extremes.y_f}};
    j["x_f"] = x_f;
    if (phi) j["phi"] = decomposition_json(*phi);
    if (psi) j["psi"] = decomposition_json(*psi);
    j["bounds"] = bounds ? bounds_json(*bounds) : nlohmann::json(nullptr);
    if (!bounds_error.empty()) j["bounds_error"] = bounds_error;
    if (example2) j["example2"] = example2_json(*example2);
    return j.dump(2);
}

EstimateReport estimate(const PlanarSystem& sys, Vec2 r0, Vec2 p0, const EstimateOptions& opts) {
    EstimateReport rep;
    rep.r0 = r0;
    rep.p0 = p0;
    rep.extremes = reference_extremes(sys, r0, opts.integration);
    rep.x_f = opts.x_f.value_or(rep.extremes.x_f);
    try {
        rep.phi = decompose_segments(sys, r0, rep.x_f, opts.integration);
        rep.psi = decompose_segments(sys, p0, rep.x_f, opts.integration);
        rep.bounds = passage_time_bounds(*rep.phi, *rep.psi);
    } catch (const std::exception& e) {
        rep.bounds_error = e.what();
    }
    if (sys.is_builtin() && sys.name() == "ex2") {
        const double y_f = opts.x_f && rep.phi ? rep.phi->end.y : rep.extremes.y_f;
        rep.example2 = example2_tolerance_condition(sys, r0, p0, rep.extremes.x_M, rep.x_f, y_f);
    }
    return rep;
}

}  // namespace tolkit
