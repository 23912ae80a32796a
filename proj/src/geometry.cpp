#include "tolkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tolkit/tolerance.hpp"

namespace tolkit {

namespace {

constexpr double kChordTolerance = 2.5e-10;
constexpr int kMaxChordDepth = 14;
constexpr double kBoundaryDistance = 1e-9;
constexpr double kInhibitionThreshold = 1e-10;
constexpr double kMarginalG = 1e-9;
constexpr double kHandoffRadius = 1e-3;
constexpr int kBisectionSteps = 60;
constexpr double kTieRelative = 1e-7;
constexpr double kTieAbsolute = 1e-12;
constexpr std::size_t kMaxExportPoints = 2000;

nlohmann::json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

nlohmann::json point_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

// Appends phi on (t0, t1] with chord deviation below kChordTolerance.
void append_refined(const Trajectory& tr, double t0, Vec2 a, double t1, Vec2 b, int depth, std::vector<Vec2>& out) {
    const double tm = 0.5 * (t0 + t1);
    const Vec2 m = tr.eval(tm);
    if (depth < kMaxChordDepth && distance(m, 0.5 * (a + b)) > kChordTolerance) {
        append_refined(tr, t0, a, tm, m, depth + 1, out);
        append_refined(tr, tm, m, t1, b, depth + 1, out);
        return;
    }
    out.push_back(b);
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double s = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return distance(p, a + s * ab);
}

IntegrationOptions orbit_options(const PlanarSystem& sys, IntegrationOptions io) {
    io.direction = Direction::forward;
    io.stop_at_ball = true;
    io.ball_center = sys.node();
    io.detect_stall = true;
    io.quadrant_guard = true;
    return io;
}

// Integrates to the node ball; anything else is an A2 failure.
Trajectory orbit_to_node(const PlanarSystem& sys, Vec2 p0, const IntegrationOptions& io, const char* label) {
    Trajectory tr = integrate(sys, p0, io);
    const Termination term = tr.termination();
    if (term == Termination::entered_ball) return tr;
    if (term == Termination::horizon && distance(tr.final_point(), sys.node()) < kHandoffRadius) return tr;
    if (term == Termination::left_domain || tr.quadrant_violation()) {
        throw PreconditionError("A2", std::string(label) + " trajectory leaves the nonnegative quadrant");
    }
    if (term == Termination::stalled || term == Termination::horizon || term == Termination::step_limit) {
        throw PreconditionError("A2", std::string(label) + " initial point is not in the basin of the node (" +
                                          to_string(term) + ")");
    }
    throw std::runtime_error(std::string(label) + " integration failed: " + to_string(term) + " " + tr.message());
}

double f_at(const PlanarSystem& sys, Vec2 p) {
    const FieldValue v = sys.field(p);
    if (!v.ok) throw DomainError(v.error);
    return v.value.x;
}

struct Piece {
    double t0, t1;
    double x0, x1;
};

// Splits a trajectory into pieces on which x(t) is monotone.
std::vector<Piece> monotone_pieces(const Trajectory& tr) {
    std::vector<Piece> out;
    if (tr.size() < 2) return out;
    std::vector<double> turns;
    int prev = 0;
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
        const double dx = tr.point(k + 1).x - tr.point(k).x;
        const int s = (dx > 0.0) - (dx < 0.0);
        if (s == 0) continue;
        if (prev != 0 && s != prev) {
            // Extremum of x between t_{k-1} and t_{k+1}; golden-section on the interpolant.
            double a = tr.t(k == 0 ? 0 : k - 1), b = tr.t(k + 1);
            const double sign = prev > 0 ? -1.0 : 1.0;  // minimize sign * x
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            double c = b - gr * (b - a), d = a + gr * (b - a);
            for (int it = 0; it < 80 && std::fabs(b - a) > 1e-14 * std::max(1.0, std::fabs(b)); ++it) {
                if (sign * tr.eval(c).x < sign * tr.eval(d).x) {
                    b = d;
                } else {
                    a = c;
                }
                c = b - gr * (b - a);
                d = a + gr * (b - a);
            }
            turns.push_back(0.5 * (a + b));
        }
        prev = s;
    }
    double start = tr.t_begin();
    turns.push_back(tr.t_end());
    for (double t : turns) {
        if (t <= start) continue;
        out.push_back({start, t, tr.eval(start).x, tr.eval(t).x});
        start = t;
    }
    return out;
}

// Point on a monotone piece with first component x.
Vec2 point_at_x(const Trajectory& tr, const Piece& pc, double x) {
    double a = pc.t0, b = pc.t1;
    const bool increasing = pc.x1 > pc.x0;
    for (int it = 0; it < kBisectionSteps; ++it) {
        const double m = 0.5 * (a + b);
        const double xm = tr.eval(m).x;
        if ((xm < x) == increasing) {
            a = m;
        } else {
            b = m;
        }
        if (b - a <= 1e-15 * std::max(1.0, std::fabs(b))) break;
    }
    return tr.eval(0.5 * (a + b));
}

std::vector<Vec2> decimate(const std::vector<Vec2>& pts) {
    if (pts.size() <= kMaxExportPoints) return pts;
    std::vector<Vec2> out;
    const double stride = static_cast<double>(pts.size() - 1) / (kMaxExportPoints - 1);
    for (std::size_t i = 0; i < kMaxExportPoints; ++i) {
        out.push_back(pts[static_cast<std::size_t>(std::llround(i * stride))]);
    }
    return out;
}

}  // namespace

const char* to_string(Inhibition i) {
    switch (i) {
        case Inhibition::inhibiting:
            return "inhibiting";
        case Inhibition::non_inhibiting:
            return "non-inhibiting";
        case Inhibition::boundary:
            return "boundary";
    }
    return "boundary";
}

const char* to_string(GraphOrder o) {
    switch (o) {
        case GraphOrder::below:
            return "below";
        case GraphOrder::above:
            return "above";
        case GraphOrder::neither:
            return "neither";
    }
    return "neither";
}

const char* to_string(PredictionKind k) {
    switch (k) {
        case PredictionKind::guaranteed:
            return "guaranteed";
        case PredictionKind::impossible:
            return "impossible";
        case PredictionKind::possible:
            return "possible";
    }
    return "possible";
}

ExcitabilityReport classify_excitable(const PlanarSystem& sys, Vec2 r0, const IntegrationOptions& opts) {
    const FixedPointReport nr = node_report(sys);
    if (!nr.satisfies_A1) throw PreconditionError("A1", "node is not a stable node with real negative eigenvalues");
    const Vec2 node = sys.node();
    if (r0.x < node.x || r0.y < node.y) throw PreconditionError("A2", "r0 must lie in the closed first quadrant");

    IntegrationOptions io = orbit_options(sys, opts);
    io.events = {
        {EventKind::f_sign_change, 0.0, false, 0, Termination::event_target},
        {EventKind::g_sign_change, 0.0, false, 0, Termination::event_target},
        {EventKind::x_equals, r0.x, false, -1, Termination::event_target},
    };

    ExcitabilityReport rep;
    rep.r0 = r0;
    rep.trajectory = orbit_to_node(sys, r0, io, "reference");
    const Trajectory& tr = rep.trajectory;

    rep.switch_times.push_back(0.0);
    rep.switch_points.push_back(r0);
    double first_g_change = std::numeric_limits<double>::infinity();
    for (const Event& e : tr.events()) {
        if (e.kind == EventKind::f_sign_change) {
            rep.switch_times.push_back(e.time);
            rep.switch_points.push_back(e.point);
        } else if (e.kind == EventKind::g_sign_change) {
            first_g_change = std::min(first_g_change, e.time);
        } else if (e.kind == EventKind::x_equals && e.time > 0.0 && std::isnan(rep.t_r)) {
            rep.t_r = e.time;
            rep.y_at_tr = e.point.y;
        }
    }

    // M is attained at t = 0 or at a sign change of f from + to -.
    rep.M = r0.x;
    for (std::size_t i = 1; i < rep.switch_points.size(); ++i) rep.M = std::max(rep.M, rep.switch_points[i].x);
    const double mtol = 1e-12 * std::max(1.0, std::fabs(rep.M));
    bool first = true;
    for (std::size_t i = 0; i < rep.switch_points.size(); ++i) {
        if (rep.switch_points[i].x < rep.M - mtol) continue;
        if (first) rep.t_m = rep.switch_times[i];
        rep.t_M = rep.switch_times[i];
        rep.y_at_tM = rep.switch_points[i].y;
        first = false;
    }

    const std::size_t k = rep.switch_times.size() - 1;
    const double f0 = f_at(sys, r0);
    rep.cond_c = f0 > 0.0 && k % 2 == 1;
    const int n = rep.cond_c ? static_cast<int>((k + 1) / 2) : 0;
    const double t_last = rep.switch_times.back();

    rep.cond_a = true;
    for (std::size_t i = 1; i < rep.switch_points.size(); ++i) {
        if (!(rep.switch_points[i].x > r0.x)) rep.cond_a = false;
    }

    rep.cond_b = first_g_change > t_last;
    if (rep.cond_b) {
        for (std::size_t s = 0; s < tr.size() && rep.cond_b; ++s) {
            const double t0 = tr.t(s);
            if (t0 > t_last) break;
            const double t1 = s + 1 < tr.size() ? std::min(tr.t(s + 1), t_last) : t0;
            for (int j = 0; j < 4; ++j) {
                const double t = t0 + (t1 - t0) * j / 4.0;
                const FieldValue v = sys.field(tr.eval(t));
                if (!v.ok || !(v.value.y > kMarginalG)) {
                    rep.cond_b = false;
                    break;
                }
            }
        }
    }

    if (!rep.cond_a) {
        rep.failure = "(a): phi_1 at a switch time does not exceed x_r";
    } else if (!rep.cond_b) {
        rep.failure = "(b): g is not positive up to the last switch time";
    } else if (!rep.cond_c) {
        rep.failure = f0 > 0.0 ? "(c): f does not end negative after an odd number of switches"
                               : "(c): f(r0) <= 0, phi_1 does not increase initially";
    }
    rep.n = rep.failure.empty() ? n : 0;
    if (rep.n > 0 && std::isnan(rep.t_r)) rep.failure = "t_r: phi_1 never returns to x_r before the node ball";
    return rep;
}

std::string ExcitabilityReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["excitable"] = n >= 1;
    j["r0"] = point_json(r0);
    j["switch_times"] = switch_times;
    j["t_r"] = number_or_null(t_r);
    j["y_at_t_r"] = number_or_null(y_at_tr);
    j["M"] = M;
    j["t_m"] = t_m;
    j["t_M"] = t_M;
    j["y_at_t_M"] = y_at_tM;
    j["conditions"] = {{"a", cond_a}, {"b", cond_b}, {"c", cond_c}};
    if (!failure.empty()) j["failure"] = failure;
    return j.dump(2);
}

LoopRegion LoopRegion::build(const ExcitabilityReport& report) {
    if (report.n < 1) throw std::invalid_argument("region T needs an excitable reference trajectory");
    if (std::isnan(report.t_r)) throw std::invalid_argument("region T needs t_r, the first return of phi_1 to x_r");
    const Trajectory& tr = report.trajectory;
    LoopRegion reg;
    reg.anchor_ = report.r0;
    reg.top_ = report.y_at_tr;
    reg.graph_.push_back(report.r0);
    for (std::size_t k = 0; k + 1 < tr.size() && tr.t(k) < report.t_r; ++k) {
        const double t0 = tr.t(k), t1 = std::min(tr.t(k + 1), report.t_r);
        // Quarter steps first so a straight-looking midpoint cannot hide a bend.
        for (int q = 0; q < 4; ++q) {
            const double a = t0 + (t1 - t0) * q / 4.0, b = t0 + (t1 - t0) * (q + 1) / 4.0;
            append_refined(tr, a, tr.eval(a), b, tr.eval(b), 0, reg.graph_);
        }
    }
    reg.graph_.back() = {report.r0.x, report.y_at_tr};
    reg.xmax_ = report.r0.x;
    double y_max = reg.graph_.front().y;
    reg.y_min_ = y_max;
    for (Vec2 p : reg.graph_) {
        reg.xmax_ = std::max(reg.xmax_, p.x);
        reg.y_min_ = std::min(reg.y_min_, p.y);
        y_max = std::max(y_max, p.y);
    }
    const std::size_t n_rows = std::clamp<std::size_t>(reg.graph_.size() / 64, 1, 4096);
    reg.row_height_ = std::max((y_max - reg.y_min_) / static_cast<double>(n_rows), 1e-300);
    reg.rows_.assign(n_rows, {});
    // The polygon closes with the segment from the last point back to the anchor.
    for (std::size_t i = 0; i < reg.graph_.size(); ++i) {
        const Vec2 a = reg.graph_[i], b = reg.graph_[(i + 1) % reg.graph_.size()];
        const std::size_t lo = reg.row_of(std::min(a.y, b.y) - kBoundaryDistance);
        const std::size_t hi = reg.row_of(std::max(a.y, b.y) + kBoundaryDistance);
        for (std::size_t r = lo; r <= hi; ++r) reg.rows_[r].push_back(static_cast<std::uint32_t>(i));
    }
    return reg;
}

std::size_t LoopRegion::row_of(double y) const {
    const double r = std::floor((y - y_min_) / row_height_);
    if (!(r > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(r), rows_.size() - 1);
}

bool LoopRegion::contains(Vec2 p) const {
    if (p == anchor_) return false;
    if (p.x < anchor_.x - kBoundaryDistance) return false;
    if (std::fabs(p.x - anchor_.x) <= kBoundaryDistance && p.y > anchor_.y && p.y <= top_ + kBoundaryDistance) {
        return true;  // L
    }
    const std::size_t n = graph_.size();
    const std::vector<std::uint32_t>& row = rows_[row_of(p.y)];
    for (std::uint32_t i : row) {
        if (i + 1 >= n) continue;
        const Vec2 a = graph_[i], b = graph_[i + 1];
        if (p.x < std::min(a.x, b.x) - kBoundaryDistance || p.x > std::max(a.x, b.x) + kBoundaryDistance ||
            p.y < std::min(a.y, b.y) - kBoundaryDistance || p.y > std::max(a.y, b.y) + kBoundaryDistance) {
            continue;
        }
        if (segment_distance(p, a, b) < kBoundaryDistance) {
            return distance(p, anchor_) >= kBoundaryDistance;  // G
        }
    }
    bool inside = false;
    for (std::uint32_t i : row) {
        const Vec2 a = graph_[i], b = graph_[(i + 1) % n];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

std::string LoopRegion::to_json() const {
    nlohmann::json j;
    j["kind"] = "closed-curve-bounded";
    nlohmann::json g = nlohmann::json::array();
    for (Vec2 p : decimate(graph_)) g.push_back(point_json(p));
    j["G"] = g;
    j["L"] = {point_json(anchor_), point_json({anchor_.x, top_})};
    j["includes"] = {{"G", true}, {"L", true}, {"anchor", false}};
    j["x_max"] = xmax_;
    return j.dump(2);
}

StripRegion StripRegion::build(const PlanarSystem& sys, const ExcitabilityReport& report, const LoopRegion& loop,
                               const StripCheckOptions& check, const IntegrationOptions& opts) {
    StripRegion reg(sys, loop);
    reg.opts_ = opts;
    reg.x_lo_ = report.r0.x;
    reg.x_hi_ = report.M;
    reg.y_lo_ = report.y_at_tM;

    double ymax_orbit = reg.y_lo_;
    for (double y : report.trajectory.ys()) ymax_orbit = std::max(ymax_orbit, y);
    const double extent = check.y_extent > 0.0 ? check.y_extent : std::max(10.0, 4.0 * (ymax_orbit - reg.y_lo_));
    StripCheck& c = reg.check_;
    c.y_max = reg.y_lo_ + extent;
    const int n = std::max(2, check.grid);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Vec2 p{reg.x_lo_ + (reg.x_hi_ - reg.x_lo_) * (i + 0.5) / n, reg.y_lo_ + extent * (j + 0.5) / n};
            if (loop.contains(p)) continue;
            ++c.samples;
            const FieldValue v = sys.field(p);
            const double f = v.ok ? v.value.x : std::numeric_limits<double>::infinity();
            if (f > c.worst_f) {
                c.worst_f = f;
                c.worst = p;
            }
            if (!(f <= 0.0)) ++c.violations;
        }
    }
    c.f_nonpositive = c.samples > 0 && c.violations == 0;
    return reg;
}

bool StripRegion::in_strip(Vec2 p) const { return p.x > x_lo_ && p.x < x_hi_ && p.y > y_lo_; }

bool StripRegion::contains(Vec2 p) const {
    if (!in_strip(p) || loop_.contains(p)) return false;
    return in_basin(sys_, p, sys_.node(), opts_).inside;
}

std::string StripRegion::to_json() const {
    nlohmann::json j;
    j["kind"] = "strip";
    j["x_range"] = {x_lo_, x_hi_};
    j["y_min"] = y_lo_;
    j["excludes"] = "T";
    j["basin_clip"] = "per-query";
    j["includes"] = {{"x_bounds", false}, {"y_min", false}};
    j["f_check"] = {{"f_nonpositive", check_.f_nonpositive}, {"samples", check_.samples},
                    {"violations", check_.violations}, {"worst_f", number_or_null(check_.worst_f)},
                    {"worst_point", point_json(check_.worst)}, {"y_max_sampled", check_.y_max}};
    return j.dump(2);
}

Inhibition inhibition_sign(const PlanarSystem& sys, Vec2 p) {
    const JacobianValue jac = sys.jacobian(p);
    if (!jac.ok) throw DomainError(jac.error);
    const double fy = jac.value.b;
    if (std::fabs(fy) < kInhibitionThreshold) return Inhibition::boundary;
    return fy < 0.0 ? Inhibition::inhibiting : Inhibition::non_inhibiting;
}

std::vector<EqualXPair> equal_x_pairs(const Trajectory& phi, const Trajectory& psi, int samples_per_piece) {
    std::vector<EqualXPair> out;
    const std::vector<Piece> a = monotone_pieces(phi), b = monotone_pieces(psi);
    for (const Piece& pa : a) {
        const double alo = std::min(pa.x0, pa.x1), ahi = std::max(pa.x0, pa.x1);
        for (const Piece& pb : b) {
            const double lo = std::max(alo, std::min(pb.x0, pb.x1));
            const double hi = std::min(ahi, std::max(pb.x0, pb.x1));
            if (!(hi - lo > 1e-12 * std::max(1.0, hi))) continue;
            for (int k = 0; k < samples_per_piece; ++k) {
                const double x = lo + (hi - lo) * (k + 0.5) / samples_per_piece;
                out.push_back({point_at_x(phi, pa, x), point_at_x(psi, pb, x)});
            }
        }
    }
    return out;
}

namespace {

// Orbits that merged to integrator accuracy near the node cannot be ordered.
bool is_tie(const EqualXPair& pr) {
    return std::fabs(pr.psi.y - pr.phi.y) <= kTieRelative * std::max(std::fabs(pr.phi.y), std::fabs(pr.psi.y)) + kTieAbsolute;
}

OrderReport order_from_pairs(const std::vector<EqualXPair>& pairs) {
    OrderReport rep;
    rep.empty_range = pairs.empty();
    for (const EqualXPair& pr : pairs) {
        const double d = pr.psi.y - pr.phi.y;
        if (is_tie(pr)) {
            ++rep.ties;
        } else if (d > 0.0) {
            ++rep.higher;
        } else {
            ++rep.lower;
        }
    }
    if (rep.higher > 0 && rep.lower == 0) rep.order = GraphOrder::below;
    if (rep.lower > 0 && rep.higher == 0) rep.order = GraphOrder::above;
    return rep;
}

}  // namespace

OrderReport bounded_order(const Trajectory& phi, const Trajectory& psi) {
    return order_from_pairs(equal_x_pairs(phi, psi));
}

std::string Prediction::to_json() const {
    nlohmann::json j;
    j["prediction"] = to_string(kind);
    j["rule"] = rule.empty() ? nlohmann::json(nullptr) : nlohmann::json(rule);
    j["detail"] = detail;
    j["order"] = to_string(order);
    j["sampled_pairs"] = sampled_pairs;
    return j.dump(2);
}

CandidateClassifier::CandidateClassifier(const PlanarSystem& sys, Vec2 r0, const GeometryOptions& opts)
    : sys_(sys), r0_(r0), opts_(opts) {
    report_ = classify_excitable(sys_, r0_, opts_.integration);
    if (report_.n >= 1 && !std::isnan(report_.t_r)) {
        loop_ = LoopRegion::build(report_);
        strip_ = StripRegion::build(sys_, report_, *loop_, opts_.strip, opts_.integration);
    }
}

Prediction CandidateClassifier::classify(Vec2 p0) const {
    const Vec2 node = sys_.node();
    if (p0.x < node.x || p0.y < node.y) throw PreconditionError("A2", "p0 must lie in the closed first quadrant");
    if (p0.x < r0_.x) throw PreconditionError("A3", "x_p < x_r");

    Prediction pred;
    if (loop_ && loop_->contains(p0)) {
        pred.kind = PredictionKind::guaranteed;
        pred.rule = "excitable-loop";
        pred.detail = "p0 lies in T, the loop closed by the excitable reference orbit";
        return pred;
    }
    std::string notes;
    if (strip_ && strip_->in_strip(p0)) {
        if (!strip_->check().f_nonpositive) {
            notes = "p0 lies in the strip above T but f > 0 was sampled there; ";
        } else if (strip_->contains(p0)) {
            pred.kind = PredictionKind::guaranteed;
            pred.rule = "strip-above-loop";
            pred.detail = "p0 lies in T-hat and f <= 0 on every sampled point of T-hat";
            return pred;
        }
    }

    const IntegrationOptions io = orbit_options(sys_, opts_.integration);
    const Trajectory psi = orbit_to_node(sys_, p0, io, "perturbed");
    const Trajectory& phi = report_.trajectory;
    const std::vector<EqualXPair> pairs = equal_x_pairs(phi, psi, opts_.samples_per_piece);
    const OrderReport ord = order_from_pairs(pairs);
    pred.order = ord.order;
    pred.sampled_pairs = pairs.size();

    // Both comparison rules rest on f(psi) > f(phi) at every equal-x pair.
    auto pairwise_f_holds = [&]() {
        for (const EqualXPair& pr : pairs) {
            if (is_tie(pr)) continue;
            const FieldValue a = sys_.field(pr.phi), b = sys_.field(pr.psi);
            if (!a.ok || !b.ok || !(b.value.x > a.value.x)) return false;
        }
        return true;
    };

    if (ord.order == GraphOrder::below) {
        std::size_t co = 0;
        for (const EqualXPair& pr : pairs) {
            if (inhibition_sign(sys_, pr.phi) == Inhibition::inhibiting &&
                inhibition_sign(sys_, pr.psi) == Inhibition::inhibiting) {
                ++co;
            }
        }
        if (co == 0 && pairwise_f_holds()) {
            pred.kind = PredictionKind::impossible;
            pred.rule = "bounded-below-no-inhibition";
            pred.detail = notes + "psi is bounded below by phi and no sampled equal-x pair shares a region of inhibition";
            return pred;
        }
        notes += "bounded below with " + std::to_string(co) + " inhibiting equal-x pairs; ";
    }

    if (ord.order == GraphOrder::above && p0.x > report_.M) {
        bool all_inhibited = true;
        for (const Trajectory* tr : {&phi, &psi}) {
            for (std::size_t k = 0; k < tr->size() && all_inhibited; ++k) {
                if (inhibition_sign(sys_, tr->point(k)) == Inhibition::non_inhibiting) all_inhibited = false;
            }
        }
        if (all_inhibited && pairwise_f_holds()) {
            pred.kind = PredictionKind::impossible;
            pred.rule = "bounded-above-inhibited";
            pred.detail = notes + "x_p > M, psi is bounded above by phi and both orbits lie where y inhibits x";
            return pred;
        }
        notes += "bounded above but not inside one region of inhibition; ";
    }

    if (check_group_property_no_tolerance(sys_, r0_, p0, opts_.integration)) {
        pred.kind = PredictionKind::impossible;
        pred.rule = "same-orbit-behind";
        pred.detail = notes + "p0 lies on the backward orbit of r0 and both first components decrease";
        return pred;
    }

    pred.kind = PredictionKind::possible;
    pred.detail = notes + "no rule decides this pair";
    return pred;
}

Prediction classify_candidate(const PlanarSystem& sys, Vec2 r0, Vec2 p0, const GeometryOptions& opts) {
    return CandidateClassifier(sys, r0, opts).classify(p0);
}

}  // namespace tolkit
