#include "tolkit/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace tolkit {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0, kC5 = 8.0 / 9.0;
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kA71 = 35.0 / 384.0, kA73 = 500.0 / 1113.0, kA74 = 125.0 / 192.0, kA75 = -2187.0 / 6784.0,
                 kA76 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;
constexpr double kD1 = -12715105075.0 / 11282082432.0, kD3 = 87487479700.0 / 32700410799.0,
                 kD4 = -10690763975.0 / 1880347072.0, kD5 = 701980252875.0 / 199316789632.0,
                 kD6 = -1453857185.0 / 822651844.0, kD7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo1 = 0.2 - kBeta * 0.75;
constexpr double kFacMin = 0.2;   // smallest step ratio
constexpr double kFacMax = 10.0;  // largest step ratio
constexpr int kEventSubdivisions = 4;
constexpr int kBisectionDepth = 80;
constexpr double kStallSpeed = 1e-6;
constexpr double kStallStep = 1e-7;

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

const char* to_string(Termination t) {
    switch (t) {
        case Termination::horizon:
            return "horizon";
        case Termination::entered_ball:
            return "entered-ball";
        case Termination::left_domain:
            return "left-domain";
        case Termination::axis_crossing:
            return "axis-crossing";
        case Termination::event_target:
            return "event-target";
        case Termination::step_underflow:
            return "step-underflow";
        case Termination::domain_error:
            return "domain-error";
        case Termination::stalled:
            return "stalled";
        case Termination::step_limit:
            return "step-limit";
    }
    return "horizon";
}

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::f_sign_change:
            return "f-sign-change";
        case EventKind::g_sign_change:
            return "g-sign-change";
        case EventKind::x_equals:
            return "x-equals";
        case EventKind::y_equals:
            return "y-equals";
        case EventKind::x_extremum:
            return "x-extremum";
        case EventKind::y_extremum:
            return "y-extremum";
    }
    return "f-sign-change";
}

std::size_t Trajectory::locate(double t) const {
    // Index k of the step [t_k, t_{k+1}] containing t.
    const bool fwd = direction_ == Direction::forward;
    auto it = fwd ? std::upper_bound(t_.begin(), t_.end(), t)
                  : std::upper_bound(t_.begin(), t_.end(), t, [](double a, double b) { return a > b; });
    std::size_t k = static_cast<std::size_t>(it - t_.begin());
    if (k == 0) return 0;
    k -= 1;
    return std::min(k, steps_.size() - 1);
}

bool Trajectory::covers(double t) const {
    if (t_.empty()) return false;
    const double lo = std::min(t_.front(), t_.back());
    const double hi = std::max(t_.front(), t_.back());
    return t >= lo && t <= hi;
}

Vec2 Trajectory::eval(double t) const {
    if (t_.size() == 1 || steps_.empty()) return point(0);
    const bool fwd = direction_ == Direction::forward;
    if (fwd ? t <= t_.front() : t >= t_.front()) return point(0);
    if (fwd ? t >= t_.back() : t <= t_.back()) return final_point();
    const std::size_t k = locate(t);
    if (t == t_[k]) return point(k);
    if (t == t_[k + 1]) return point(k + 1);
    const StepCoeffs& s = steps_[k];
    const double th = (t - t_[k]) / s.h;
    const double th1 = 1.0 - th;
    auto poly = [&](const std::array<double, 5>& c) {
        return c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])));
    };
    return {poly(s.cx), poly(s.cy)};
}

std::string Trajectory::to_csv() const {
    std::string out = "t,x,y\n";
    char buf[128];
    for (std::size_t k = 0; k < t_.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t_[k], x_[k], y_[k]);
        out += buf;
    }
    return out;
}

std::string Trajectory::events_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const Event& e : events_) {
        nlohmann::json j;
        j["time"] = e.time;
        j["x"] = e.point.x;
        j["y"] = e.point.y;
        j["kind"] = to_string(e.kind);
        if (e.kind == EventKind::x_equals || e.kind == EventKind::y_equals) j["value"] = e.value;
        j["direction"] = e.direction;
        arr.push_back(j);
    }
    nlohmann::json doc;
    doc["termination"] = to_string(termination_);
    doc["events"] = arr;
    return doc.dump(2);
}

class Integrator {
public:
    Integrator(const PlanarSystem& sys, const IntegrationOptions& opts) : sys_(sys), opts_(opts) {
        sign_ = opts.direction == Direction::forward ? 1.0 : -1.0;
        center_ = opts.ball_center.value_or(sys.node());
        states_.resize(opts.events.size());
    }

    Trajectory run(Vec2 p0) {
        traj_.direction_ = opts_.direction;
        push_sample(0.0, p0);
        if (!std::isfinite(p0.x) || !std::isfinite(p0.y)) {
            return finish(Termination::domain_error, "non-finite initial point");
        }
        double fx0, fy0;
        if (!sys_.field_fast(p0.x, p0.y, fx0, fy0)) {
            return finish(Termination::domain_error, "field undefined at the initial point");
        }
        check_quadrant(p0);
        if (opts_.stop_at_ball && distance(p0, center_) <= opts_.eps_ball) {
            return finish(Termination::entered_ball, "");
        }
        if (opts_.quadrant_guard && traj_.quadrant_violation_) {
            return finish(Termination::left_domain, "initial point outside the nonnegative quadrant");
        }
        for (std::size_t i = 0; i < opts_.events.size(); ++i) {
            double v;
            if (event_value(opts_.events[i], p0, v) && sgn(v) != 0.0) states_[i] = {static_cast<int>(sgn(v)), 0.0};
        }

        double t = 0.0;
        const double t_end = sign_ * opts_.horizon;
        double y[2] = {p0.x, p0.y};
        double k1[2] = {fx0, fy0};
        double h = initial_step(y, k1);
        double facold = 1e-4;
        bool last_rejected = false;
        std::size_t steps = 0;

        while (true) {
            if (steps++ >= opts_.max_steps) return finish(Termination::step_limit, "maximum step count reached");
            bool hit_end = false;
            if (sign_ * (t + h - t_end) >= 0.0) {
                h = t_end - t;
                hit_end = true;
            }
            if (std::fabs(h) < 1e-14 * std::max(1.0, std::fabs(t))) {
                return finish(Termination::step_underflow, "step size underflow");
            }

            double k2[2], k3[2], k4[2], k5[2], k6[2], k7[2], y1[2], ys[2];
            bool ok = true;
            auto stage = [&](double* out) {
                if (ok && !sys_.field_fast(ys[0], ys[1], out[0], out[1])) ok = false;
                if (ok && (!std::isfinite(out[0]) || !std::isfinite(out[1]))) ok = false;
            };
            for (int i = 0; i < 2; ++i) ys[i] = y[i] + h * kA21 * k1[i];
            stage(k2);
            for (int i = 0; i < 2; ++i) ys[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
            stage(k3);
            for (int i = 0; i < 2; ++i) ys[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
            stage(k4);
            for (int i = 0; i < 2; ++i) {
                ys[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] + kA54 * k4[i]);
            }
            stage(k5);
            for (int i = 0; i < 2; ++i) {
                ys[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] + kA64 * k4[i] + kA65 * k5[i]);
            }
            stage(k6);
            for (int i = 0; i < 2; ++i) {
                y1[i] = y[i] + h * (kA71 * k1[i] + kA73 * k3[i] + kA74 * k4[i] + kA75 * k5[i] + kA76 * k6[i]);
                ys[i] = y1[i];
            }
            stage(k7);
            if (!ok) {
                // Stage left the domain of the field: shrink and retry.
                h *= 0.5;
                ++traj_.rejected_;
                last_rejected = true;
                continue;
            }

            double err = 0.0;
            for (int i = 0; i < 2; ++i) {
                const double sk = opts_.abs_tol + opts_.rel_tol * std::max(std::fabs(y[i]), std::fabs(y1[i]));
                const double e =
                    h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] + kE6 * k6[i] + kE7 * k7[i]);
                err += (e / sk) * (e / sk);
            }
            err = std::sqrt(err / 2.0);
            const double fac11 = std::pow(err, kExpo1);

            if (err <= 1.0) {
                double fac = fac11 / std::pow(facold, kBeta);
                fac = std::max(1.0 / kFacMax, std::min(1.0 / kFacMin, fac / kSafety));
                double hnew = h / fac;
                facold = std::max(err, 1e-4);

                Trajectory::StepCoeffs c;
                c.h = h;
                double* comps[2] = {c.cx.data(), c.cy.data()};
                for (int i = 0; i < 2; ++i) {
                    const double ydiff = y1[i] - y[i];
                    const double bspl = h * k1[i] - ydiff;
                    comps[i][0] = y[i];
                    comps[i][1] = ydiff;
                    comps[i][2] = bspl;
                    comps[i][3] = ydiff - h * k7[i] - bspl;
                    comps[i][4] = h * (kD1 * k1[i] + kD3 * k3[i] + kD4 * k4[i] + kD5 * k5[i] + kD6 * k6[i] +
                                       kD7 * k7[i]);
                }
                const double t_new = hit_end ? t_end : t + h;
                traj_.steps_.push_back(c);
                push_sample(t_new, {y1[0], y1[1]});

                const std::optional<Termination> stop = inspect_step(t, t_new);
                if (stop) return finish(*stop, "");

                t = t_new;
                y[0] = y1[0];
                y[1] = y1[1];
                k1[0] = k7[0];
                k1[1] = k7[1];
                if (hit_end) return finish(Termination::horizon, "");

                const Vec2 p{y[0], y[1]};
                if (!std::isfinite(p.x) || !std::isfinite(p.y) || norm(p) > opts_.blowup) {
                    return finish(Termination::left_domain, "solution left the bounded region");
                }
                if (opts_.domain && !opts_.domain->contains(p)) return finish(Termination::left_domain, "");
                if (opts_.detect_stall && std::hypot(k1[0], k1[1]) < kStallSpeed && stalled_at(p, k1)) {
                    return finish(Termination::stalled, "converging to a fixed point other than the node");
                }

                if (last_rejected) hnew = sign_ * std::min(std::fabs(hnew), std::fabs(h));
                if (std::fabs(hnew) > opts_.max_step) hnew = sign_ * opts_.max_step;
                h = hnew;
                last_rejected = false;
            } else {
                h = h / std::min(1.0 / kFacMin, fac11 / kSafety);
                ++traj_.rejected_;
                last_rejected = true;
            }
        }
    }

private:
    struct EventState {
        int sign = 0;
        double t = 0.0;
    };

    void push_sample(double t, Vec2 p) {
        traj_.t_.push_back(t);
        traj_.x_.push_back(p.x);
        traj_.y_.push_back(p.y);
    }

    bool stalled_at(Vec2 p, const double* f) const {
        const JacobianValue jv = sys_.jacobian(p);
        if (!jv.ok) return false;
        const Mat2& J = jv.value;
        const double det = J.det();
        if (det == 0.0 || !std::isfinite(det)) return false;
        const Vec2 step{(J.d * f[0] - J.b * f[1]) / det, (-J.c * f[0] + J.a * f[1]) / det};
        if (norm(step) > kStallStep * std::max(1.0, norm(p))) return false;
        return distance(p - step, center_) > 10.0 * opts_.eps_ball;
    }

    void check_quadrant(Vec2 p) {
        if (p.x < -opts_.eps_neg || p.y < -opts_.eps_neg) traj_.quadrant_violation_ = true;
    }

    bool event_value(const EventRequest& r, Vec2 p, double& v) const {
        switch (r.kind) {
            case EventKind::f_sign_change:
            case EventKind::x_extremum: {
                double gy;
                return sys_.field_fast(p.x, p.y, v, gy);
            }
            case EventKind::g_sign_change:
            case EventKind::y_extremum: {
                double fx;
                return sys_.field_fast(p.x, p.y, fx, v);
            }
            case EventKind::x_equals:
                v = p.x - r.value;
                return true;
            case EventKind::y_equals:
                v = p.y - r.value;
                return true;
        }
        return false;
    }

    // Refines a sign change of the request's function on [ta, tb] (flow order).
    double refine(const EventRequest& r, double ta, double tb, int sign_a) const {
        for (int i = 0; i < kBisectionDepth; ++i) {
            const double tm = 0.5 * (ta + tb);
            if (tm == ta || tm == tb) break;
            double v;
            if (!event_value(r, traj_.eval(tm), v)) break;
            if (sgn(v) == 0.0) return tm;
            if (static_cast<int>(sgn(v)) == sign_a) {
                ta = tm;
            } else {
                tb = tm;
            }
        }
        double va = 0.0, vb = 0.0;
        const bool oka = event_value(r, traj_.eval(ta), va);
        const bool okb = event_value(r, traj_.eval(tb), vb);
        if (oka && okb) return std::fabs(va) <= std::fabs(vb) ? ta : tb;
        return 0.5 * (ta + tb);
    }

    double refine_ball(double ta, double tb) const {
        for (int i = 0; i < kBisectionDepth; ++i) {
            const double tm = 0.5 * (ta + tb);
            if (tm == ta || tm == tb) break;
            if (distance(traj_.eval(tm), center_) <= opts_.eps_ball) {
                tb = tm;
            } else {
                ta = tm;
            }
        }
        return tb;
    }

    // Events, ball entry and quadrant checks on the newest step.
    std::optional<Termination> inspect_step(double ta, double tb) {
        struct Candidate {
            double time;
            std::size_t request;
            int direction;
        };
        std::vector<Candidate> found;
        for (int k = 1; k <= kEventSubdivisions; ++k) {
            const double tk = k == kEventSubdivisions ? tb : ta + (tb - ta) * k / kEventSubdivisions;
            const Vec2 p = traj_.eval(tk);
            check_quadrant(p);
            for (std::size_t i = 0; i < opts_.events.size(); ++i) {
                const EventRequest& r = opts_.events[i];
                double v;
                if (!event_value(r, p, v) || sgn(v) == 0.0) continue;
                const int s = static_cast<int>(sgn(v));
                EventState& st = states_[i];
                if (st.sign != 0 && s != st.sign) {
                    const int dir = s > st.sign ? 1 : -1;
                    if (r.direction == 0 || r.direction == dir) {
                        found.push_back({refine(r, st.t, tk, st.sign), i, dir});
                    }
                }
                st = {s, tk};
            }
        }
        std::sort(found.begin(), found.end(),
                  [&](const Candidate& a, const Candidate& b) { return sign_ * a.time < sign_ * b.time; });

        std::optional<double> ball_time;
        if (opts_.stop_at_ball && distance(traj_.final_point(), center_) <= opts_.eps_ball) {
            ball_time = refine_ball(ta, tb);
        }

        std::optional<Termination> stop;
        double stop_time = tb;
        if (ball_time) {
            stop = Termination::entered_ball;
            stop_time = *ball_time;
        }
        for (const Candidate& c : found) {
            if (stop && sign_ * c.time > sign_ * stop_time) break;
            const EventRequest& r = opts_.events[c.request];
            Event e;
            e.time = c.time;
            e.point = traj_.eval(c.time);
            e.kind = r.kind;
            e.value = r.value;
            e.direction = c.direction;
            traj_.events_.push_back(e);
            if (r.terminal) {
                stop = r.reason;
                stop_time = c.time;
                break;
            }
        }
        if (stop && stop_time != tb) truncate(stop_time);
        if (!stop && opts_.quadrant_guard && traj_.quadrant_violation_) stop = Termination::left_domain;
        return stop;
    }

    void truncate(double t) {
        const Vec2 p = traj_.eval(t);
        traj_.t_.back() = t;
        traj_.x_.back() = p.x;
        traj_.y_.back() = p.y;
    }

    double initial_step(const double* y, const double* f0) const {
        double dnf = 0.0, dny = 0.0;
        double sk[2];
        for (int i = 0; i < 2; ++i) {
            sk[i] = opts_.abs_tol + opts_.rel_tol * std::fabs(y[i]);
            dnf += (f0[i] / sk[i]) * (f0[i] / sk[i]);
            dny += (y[i] / sk[i]) * (y[i] / sk[i]);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
        h = std::min(h, opts_.max_step);
        h = std::min(h, opts_.horizon);
        double y1[2], f1[2];
        for (int i = 0; i < 2; ++i) y1[i] = y[i] + sign_ * h * f0[i];
        if (!sys_.field_fast(y1[0], y1[1], f1[0], f1[1])) return sign_ * h * 1e-3;
        double der2 = 0.0;
        for (int i = 0; i < 2; ++i) der2 += ((f1[i] - f0[i]) / sk[i]) * ((f1[i] - f0[i]) / sk[i]);
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::fabs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
        h = std::min({100.0 * h, h1, opts_.max_step, opts_.horizon});
        return sign_ * h;
    }

    Trajectory finish(Termination reason, std::string message) {
        traj_.termination_ = reason;
        traj_.message_ = std::move(message);
        return std::move(traj_);
    }

    const PlanarSystem& sys_;
    const IntegrationOptions& opts_;
    double sign_ = 1.0;
    Vec2 center_;
    std::vector<EventState> states_;
    Trajectory traj_;
};

Trajectory integrate(const PlanarSystem& sys, Vec2 p0, const IntegrationOptions& opts) {
    Integrator in(sys, opts);
    return in.run(p0);
}

Trajectory integrate_backward_to_axis(const PlanarSystem& sys, Vec2 p0, double horizon) {
    IntegrationOptions o;
    o.direction = Direction::backward;
    o.horizon = horizon;
    o.stop_at_ball = false;
    o.blowup = 1e6;
    o.events = {
        {EventKind::y_equals, 0.0, true, 0, Termination::axis_crossing},
        {EventKind::x_equals, 0.0, true, 0, Termination::axis_crossing},
    };
    return integrate(sys, p0, o);
}

BasinResult in_basin(const PlanarSystem& sys, Vec2 p0, Vec2 fp, const IntegrationOptions& opts) {
    BasinResult r;
    if (distance(p0, fp) <= opts.eps_ball) return r.inside = true, r;
    IntegrationOptions o = opts;
    o.direction = Direction::forward;
    o.ball_center = fp;
    o.stop_at_ball = true;
    o.quadrant_guard = true;
    o.events.clear();
    o.detect_stall = true;
    const Trajectory tr = integrate(sys, p0, o);
    r.reason = tr.termination();
    switch (tr.termination()) {
        case Termination::entered_ball:
            r.inside = true;
            break;
        case Termination::horizon:
        case Termination::step_limit:
            r.inside = false;
            r.conclusive = false;
            break;
        default:
            r.inside = false;
            break;
    }
    return r;
}

}  // namespace tolkit
