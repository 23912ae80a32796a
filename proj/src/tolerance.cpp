#include "tolkit/tolerance.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

namespace tolkit {

namespace {

constexpr int kScanSubdivisions = 4;
constexpr int kTailSamples = 400;
constexpr double kTailSpan = 50.0;  // tail scan length in units of 1/|lambda_1|
constexpr double kNoiseFactor = 100.0;
constexpr double kOrbitDistance = 1e-6;

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

nlohmann::json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

std::string fmt_point(Vec2 p) {
    std::ostringstream os;
    os.precision(10);
    os << "(" << p.x << ", " << p.y << ")";
    return os.str();
}

// Bisection for the point where fn changes between >= 0 and < 0 on [a, b].
template <class Fn>
double bisect(Fn&& fn, double a, double b) {
    const bool side_a = fn(a) >= 0.0;
    for (int i = 0; i < 100; ++i) {
        const double m = 0.5 * (a + b);
        if (m == a || m == b) break;
        if ((fn(m) >= 0.0) == side_a) {
            a = m;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

template <class Fn>
double golden_min(Fn&& fn, double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int i = 0; i < 80 && std::fabs(b - a) > 1e-13 * std::max(1.0, std::fabs(a)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = fn(d);
        }
    }
    return fc < fd ? c : d;
}

void check_reached(const Trajectory& tr, Vec2 node, const char* label, Vec2 start, double linear_radius,
                   bool& handed_off) {
    if (tr.quadrant_violation()) {
        throw PreconditionError("A2", std::string(label) + " trajectory from " + fmt_point(start) +
                                          " leaves the nonnegative quadrant");
    }
    switch (tr.termination()) {
        case Termination::entered_ball:
            handed_off = true;
            return;
        case Termination::horizon:
        case Termination::step_limit:
            handed_off = distance(tr.final_point(), node) <= linear_radius;
            return;
        default:
            throw PreconditionError("A2", std::string(label) + " trajectory from " + fmt_point(start) +
                                              " is not in the basin of the node (" + to_string(tr.termination()) +
                                              (tr.message().empty() ? "" : ": " + tr.message()) + ")");
    }
}

}  // namespace

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::tolerance:
            return "tolerance";
        case Outcome::no_tolerance:
            return "no-tolerance";
        case Outcome::inconclusive:
            return "inconclusive";
    }
    return "inconclusive";
}

const char* to_string(Justification j) {
    switch (j) {
        case Justification::none:
            return "none";
        case Justification::horizon_asymptotic:
            return "horizon+asymptotic";
        case Justification::group_property:
            return "group-property";
        case Justification::analytic:
            return "analytic";
        case Justification::tail:
            return "asymptotic-tail";
    }
    return "none";
}

NodeLinearization::NodeLinearization(const PlanarSystem& sys) : node_(sys.node()) {
    const JacobianValue jv = sys.jacobian(node_);
    if (!jv.ok) throw DomainError("jacobian at the node: " + jv.error);
    j_ = jv.value;
    const Eigenvalues e = eigenvalues(j_);
    if (e.complex) throw PreconditionError("A1", "node has complex eigenvalues");
    l1_ = e.re1;
    l2_ = e.re2;
    const double scale = std::max(std::fabs(l1_), std::fabs(l2_));
    if (std::fabs(l1_ - l2_) < 1e-9 * scale) {
        repeated_ = true;
        l1_ = l2_ = 0.5 * (e.re1 + e.re2);
    }
}

Vec2 NodeLinearization::propagate(Vec2 p, double s) const {
    // exp(J s) = exp(l2 s) [I + phi(s) (J - l2 I)], phi(s) = (exp((l1 - l2) s) - 1) / (l1 - l2).
    const Vec2 q = p - node_;
    const double dl = l1_ - l2_;
    const double e2 = std::exp(l2_ * s);
    double coef;  // exp(l2 s) phi(s), written to avoid inf * 0 for large s
    if (repeated_) {
        coef = s * e2;
    } else if (dl * s < 1.0) {
        coef = e2 * (std::expm1(dl * s) / dl);
    } else {
        coef = (std::exp(l1_ * s) - e2) / dl;
    }
    const Vec2 mq{(j_.a - l2_) * q.x + j_.b * q.y, j_.c * q.x + (j_.d - l2_) * q.y};
    return node_ + (e2 * q + coef * mq);
}

std::string ToleranceVerdict::to_json() const {
    nlohmann::json j;
    j["outcome"] = to_string(outcome);
    j["t1"] = number_or_null(t1);
    j["tau"] = number_or_null(tau);
    j["t2"] = number_or_null(t2);
    j["depth"] = depth;
    j["margin"] = margin;
    j["horizon"] = horizon;
    j["justification"] = to_string(justification);
    j["reason"] = reason;
    j["assumptions_checked"] = assumptions_checked;
    if (tail.used) {
        nlohmann::json t;
        t["handoff_time"] = tail.handoff_time;
        t["slow_rate"] = tail.slow_rate;
        t["fast_rate"] = tail.fast_rate;
        t["slow_mode_visible"] = tail.slow_mode_visible;
        t["phi_amplitude"] = tail.phi_amplitude;
        t["psi_amplitude"] = tail.psi_amplitude;
        t["sign_at_infinity"] = tail.sign_at_infinity;
        t["crossing"] = number_or_null(tail.crossing);
        j["tail"] = t;
    }
    return j.dump(2);
}

ToleranceVerdict detect_tolerance(const PlanarSystem& sys, Vec2 r0, Vec2 p0, const ToleranceOptions& opts) {
    ToleranceVerdict v;
    v.horizon = opts.integration.horizon;
    const Vec2 node = sys.node();

    const FixedPointReport nr = node_report(sys);
    if (nr.residual > 1e-9) throw PreconditionError("A1", "designated node " + fmt_point(node) + " is not a fixed point");
    if (!nr.satisfies_A1) {
        throw PreconditionError("A1", std::string("node is a ") + to_string(nr.classification) +
                                          ", not a stable node with real negative eigenvalues");
    }
    v.assumptions_checked.push_back("A1: node " + fmt_point(node) + " has real negative eigenvalues");
    if (r0.x < node.x || r0.y < node.y || p0.x < node.x || p0.y < node.y) {
        throw PreconditionError("A2", "initial points must lie in the closed first quadrant");
    }
    if (p0.x < r0.x) throw PreconditionError("A3", "x_p < x_r");
    v.assumptions_checked.push_back("A3: x_p >= x_r");

    if (r0 == p0) {
        v.outcome = Outcome::no_tolerance;
        v.justification = Justification::analytic;
        v.reason = "identical initial points give identical trajectories";
        v.assumptions_checked.push_back("A2: not needed for identical points");
        return v;
    }
    if (opts.use_group_property && check_group_property_no_tolerance(sys, r0, p0, opts.integration)) {
        v.outcome = Outcome::no_tolerance;
        v.justification = Justification::group_property;
        v.reason = "p0 lies on the backward orbit of r0 and both first components decrease";
        return v;
    }

    IntegrationOptions io = opts.integration;
    io.direction = Direction::forward;
    io.stop_at_ball = true;
    io.ball_center = node;
    io.detect_stall = true;
    io.quadrant_guard = false;
    io.events.clear();
    const Trajectory phi = integrate(sys, r0, io);
    const Trajectory psi = integrate(sys, p0, io);
    bool phi_done = false, psi_done = false;
    check_reached(phi, node, "reference", r0, opts.linear_radius, phi_done);
    check_reached(psi, node, "perturbed", p0, opts.linear_radius, psi_done);
    v.assumptions_checked.push_back("A2: both trajectories stay in the nonnegative quadrant");
    const bool tail_ok = phi_done && psi_done;
    if (tail_ok) v.assumptions_checked.push_back("A2: both trajectories reach the node ball");

    const NodeLinearization lin(sys);
    auto state = [&](const Trajectory& tr, double t) {
        if (t <= tr.t_end()) return tr.eval(t);
        return lin.propagate(tr.final_point(), t - tr.t_end());
    };
    auto diff = [&](double t) { return state(psi, t).x - state(phi, t).x; };

    // Shared grid: union of both adaptive grids, subdivided, plus the linear tail.
    const double te = tail_ok ? std::max(phi.t_end(), psi.t_end()) : std::min(phi.t_end(), psi.t_end());
    std::vector<double> knots;
    knots.reserve(phi.size() + psi.size());
    for (double t : phi.times()) if (t <= te) knots.push_back(t);
    for (double t : psi.times()) if (t <= te) knots.push_back(t);
    knots.push_back(te);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    std::vector<double> grid;
    grid.reserve(knots.size() * kScanSubdivisions + kTailSamples);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        for (int k = 0; k < kScanSubdivisions; ++k) {
            grid.push_back(knots[i] + (knots[i + 1] - knots[i]) * k / kScanSubdivisions);
        }
    }
    grid.push_back(knots.back());
    const double tail_span = kTailSpan / std::fabs(lin.slow());
    if (tail_ok) {
        for (int k = 1; k <= kTailSamples; ++k) {
            const double s = tail_span * (static_cast<double>(k) / kTailSamples) * (static_cast<double>(k) / kTailSamples);
            grid.push_back(te + s);
        }
    }

    std::vector<double> dv(grid.size());
    bool shallow = false;
    double min_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec2 a = state(phi, grid[i]);
        const Vec2 b = state(psi, grid[i]);
        dv[i] = b.x - a.x;
        min_d = std::min(min_d, dv[i]);
        const double noise =
            kNoiseFactor * (io.abs_tol + io.rel_tol * std::max(std::fabs(a.x), std::fabs(b.x)));
        if (dv[i] < -noise && dv[i] >= -opts.eps_tol) shallow = true;
    }
    v.margin = -min_d;

    // Tail: both trajectories linearized at te.
    if (tail_ok) {
        TailReport& tr = v.tail;
        tr.used = true;
        tr.handoff_time = te;
        tr.slow_rate = lin.slow();
        tr.fast_rate = lin.fast();
        const Vec2 pa = state(phi, te) - node;
        const Vec2 pb = state(psi, te) - node;
        const Mat2& J = lin.jacobian();
        const double l1 = lin.slow(), l2 = lin.fast();
        const double row_scale = std::max({std::fabs(J.a), std::fabs(J.b), std::fabs(J.c), std::fabs(J.d)});
        tr.slow_mode_visible = std::fabs(J.a - l2) > 1e-12 * row_scale || std::fabs(J.b) > 1e-12 * row_scale;
        auto first_row = [&](Vec2 q) { return (J.a - l2) * q.x + J.b * q.y; };
        const Vec2 delta = pb - pa;
        const double u = first_row(delta);
        // Leading x-coefficients, referred back to t = 0.
        double slow_a, slow_b, fast_a, fast_b;
        if (lin.repeated()) {
            slow_a = first_row(pa) * std::exp(-l1 * te);
            slow_b = first_row(pb) * std::exp(-l1 * te);
            fast_a = pa.x * std::exp(-l2 * te);
            fast_b = pb.x * std::exp(-l2 * te);
        } else {
            const double dl = l1 - l2;
            slow_a = first_row(pa) / dl * std::exp(-l1 * te);
            slow_b = first_row(pb) / dl * std::exp(-l1 * te);
            fast_a = (pa.x - first_row(pa) / dl) * std::exp(-l2 * te);
            fast_b = (pb.x - first_row(pb) / dl) * std::exp(-l2 * te);
        }
        const bool use_slow = tr.slow_mode_visible;
        tr.phi_amplitude = use_slow ? slow_a : fast_a;
        tr.psi_amplitude = use_slow ? slow_b : fast_b;
        const double gap = tr.psi_amplitude - tr.phi_amplitude;
        const double scale = std::max({1.0, std::fabs(tr.phi_amplitude), std::fabs(tr.psi_amplitude)});
        tr.sign_at_infinity = std::fabs(gap) < opts.tie_tolerance * scale ? 0 : static_cast<int>(sgn(gap));
        if (u != 0.0) {
            const double r = -delta.x / u;
            double s = std::numeric_limits<double>::quiet_NaN();
            if (lin.repeated()) {
                s = r;
            } else {
                const double dl = l1 - l2;
                if (r * dl > -1.0) s = std::log1p(r * dl) / dl;
            }
            if (s > 0.0) tr.crossing = te + s;
        }
    }

    // First deep window.
    std::size_t first = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (dv[i] < -opts.eps_tol) {
            first = i;
            break;
        }
    }
    auto onset_before = [&](std::size_t idx) {
        std::size_t j = idx;
        while (j > 0 && dv[j] < 0.0) --j;
        if (j == 0 && dv[0] <= 0.0) return 0.0;  // tolerance from t = 0+
        return bisect(diff, grid[j], grid[j + 1]);
    };

    if (first < grid.size()) {
        std::size_t end = first;
        while (end < grid.size() && dv[end] < 0.0) ++end;
        std::size_t m = first;
        for (std::size_t i = first; i < end; ++i) if (dv[i] < dv[m]) m = i;
        const double lo = grid[m > 0 ? m - 1 : 0];
        const double hi = grid[std::min(m + 1, grid.size() - 1)];
        double tau = golden_min(diff, lo, hi);
        if (!(diff(tau) <= dv[m])) tau = grid[m];
        v.outcome = Outcome::tolerance;
        v.justification = Justification::none;
        v.t1 = onset_before(first);
        v.tau = tau;
        v.depth = -diff(tau);
        if (end < grid.size()) {
            v.t2 = bisect(diff, grid[end - 1], grid[end]);
        } else if (tail_ok && v.tail.sign_at_infinity < 0) {
            v.t2 = std::numeric_limits<double>::infinity();
        } else if (tail_ok && !std::isnan(v.tail.crossing)) {
            v.t2 = v.tail.crossing;
        } else {
            v.t2 = grid.back();
        }
        v.reason = "psi_1 falls below phi_1 by more than eps_tol";
        return v;
    }

    if (!tail_ok) {
        v.outcome = Outcome::inconclusive;
        v.reason = "a trajectory did not reach the node within the horizon";
        return v;
    }
    if (v.tail.sign_at_infinity == 0) {
        v.outcome = Outcome::inconclusive;
        v.reason = "asymptotic amplitudes tie at the node";
        return v;
    }
    if (v.tail.sign_at_infinity < 0) {
        // psi_1 ends below phi_1 but only at node scale.
        std::size_t last_nonneg = grid.size();
        for (std::size_t i = grid.size(); i-- > 0;) {
            if (dv[i] >= 0.0) {
                last_nonneg = i;
                break;
            }
        }
        v.outcome = Outcome::tolerance;
        v.justification = Justification::tail;
        if (last_nonneg + 1 < grid.size()) {
            v.t1 = bisect(diff, grid[last_nonneg], grid[last_nonneg + 1]);
        } else {
            v.t1 = std::isnan(v.tail.crossing) ? grid.back() : v.tail.crossing;
        }
        std::size_t m = grid.size() - 1;
        for (std::size_t i = 0; i < grid.size(); ++i) if (grid[i] > v.t1 && dv[i] < dv[m]) m = i;
        v.tau = std::max(grid[m], v.t1);
        v.depth = -diff(v.tau);
        v.t2 = std::numeric_limits<double>::infinity();
        v.reason = "the slowest visible mode of psi_1 decays below that of phi_1";
        return v;
    }
    if (shallow) {
        v.outcome = Outcome::inconclusive;
        v.reason = "psi_1 dips below phi_1 by less than eps_tol";
        return v;
    }
    v.outcome = Outcome::no_tolerance;
    v.justification = Justification::horizon_asymptotic;
    v.reason = "psi_1 >= phi_1 up to the node ball and the asymptotic amplitude of psi_1 exceeds that of phi_1";
    return v;
}

bool check_group_property_no_tolerance(const PlanarSystem& sys, Vec2 r0, Vec2 p0, const IntegrationOptions& opts) {
    const Trajectory back = integrate_backward_to_axis(sys, r0, 50.0);
    if (back.size() < 2) return false;
    auto dist_at = [&](double t) { return distance(back.eval(t), p0); };
    double best_t = back.t(0);
    double best = dist_at(best_t);
    for (std::size_t k = 0; k + 1 < back.size(); ++k) {
        for (int s = 1; s <= 16; ++s) {
            const double t = back.t(k) + (back.t(k + 1) - back.t(k)) * s / 16.0;
            const double d = dist_at(t);
            if (d < best) {
                best = d;
                best_t = t;
            }
        }
    }
    const double span = std::fabs(back.t_end() - back.t_begin()) / static_cast<double>(back.size()) + 1e-3;
    const double lo = std::max(back.t_end(), best_t - span);
    const double hi = std::min(back.t_begin(), best_t + span);
    best = std::min(best, dist_at(golden_min(dist_at, lo, hi)));
    if (best >= kOrbitDistance) return false;

    IntegrationOptions io = opts;
    io.direction = Direction::forward;
    io.events.clear();
    for (Vec2 start : {r0, p0}) {
        const Trajectory tr = integrate(sys, start, io);
        double prev = tr.eval(tr.t_begin()).x;
        for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
            for (int s = 1; s <= 4; ++s) {
                const double x = tr.eval(tr.t(k) + (tr.t(k + 1) - tr.t(k)) * s / 4.0).x;
                if (x > prev + 1e-12 * std::max(1.0, std::fabs(prev))) return false;
                prev = x;
            }
        }
    }
    return true;
}

RobustnessReport robustness_balls(const PlanarSystem& sys, Vec2 r0, Vec2 p0, const ToleranceVerdict& verdict,
                                  std::size_t n_samples, double radius, std::uint64_t seed,
                                  const ToleranceOptions& opts) {
    RobustnessReport rep;
    rep.requested_radius = radius;
    rep.radius = radius;
    rep.seed = seed;
    if (verdict.outcome != Outcome::tolerance) {
        throw std::invalid_argument("robustness balls require a tolerance verdict");
    }
    if (radius <= 0.0 || n_samples == 0) return rep;

    constexpr int kMaxHalvings = 5;
    for (int h = 0; h <= kMaxHalvings; ++h) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(h));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto sample = [&](Vec2 c) {
            const double r = rep.radius * std::sqrt(u(rng));
            const double th = 2.0 * M_PI * u(rng);
            return Vec2{c.x + r * std::cos(th), c.y + r * std::sin(th)};
        };
        std::size_t ok_ref = 0, ok_pert = 0;
        rep.samples_ref = rep.samples_pert = rep.rejected = 0;
        for (std::size_t i = 0; i < n_samples; ++i) {
            const Vec2 r1 = sample(r0);
            const Vec2 p1 = sample(p0);
            for (int which = 0; which < 2; ++which) {
                const Vec2 a = which == 0 ? r1 : r0;
                const Vec2 b = which == 0 ? p0 : p1;
                try {
                    const ToleranceVerdict tv = detect_tolerance(sys, a, b, opts);
                    const bool good = tv.outcome == Outcome::tolerance;
                    if (which == 0) {
                        ++rep.samples_ref;
                        ok_ref += good;
                    } else {
                        ++rep.samples_pert;
                        ok_pert += good;
                    }
                } catch (const PreconditionError&) {
                    ++rep.rejected;  // outside the quadrant, the basin, or x >= x_r
                }
            }
        }
        rep.fraction_ref = rep.samples_ref ? static_cast<double>(ok_ref) / rep.samples_ref : 1.0;
        rep.fraction_pert = rep.samples_pert ? static_cast<double>(ok_pert) / rep.samples_pert : 1.0;
        const std::size_t total = rep.samples_ref + rep.samples_pert;
        rep.fraction = total ? static_cast<double>(ok_ref + ok_pert) / total : 1.0;
        rep.halvings = h;
        if (rep.fraction >= 1.0 || h == kMaxHalvings) break;
        rep.radius *= 0.5;
    }
    return rep;
}

}  // namespace tolkit
