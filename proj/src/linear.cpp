#include "tolkit/linear.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tolkit/system.hpp"

namespace tolkit {

namespace {

// Eigenvalues come from a square root, so a rounding error of eps in the
// discriminant shows up as sqrt(eps) in their separation.
constexpr double kRepeatedTolerance = 1e-7;
constexpr double kZeroComponent = 1e-12;
constexpr double kSensitiveComponent = 1e-8;
constexpr int kNonnegSamples = 1000;
constexpr double kNonnegHorizon = 50.0;

// Null vector of the rank-one matrix A - lambda I.
Vec2 null_vector(const Mat2& a, double lambda) {
    const double n11 = a.a - lambda, n12 = a.b, n21 = a.c, n22 = a.d - lambda;
    const double r1 = std::hypot(n11, n12), r2 = std::hypot(n21, n22);
    Vec2 v = r1 >= r2 ? Vec2{-n12, n11} : Vec2{-n22, n21};
    const double n = norm(v);
    return (1.0 / n) * v;
}

// Scales v so its first component is 1, or to (0, 1) when it vanishes.
Vec2 normalize_first(Vec2 v, bool& zero_first, bool& sensitive) {
    const double rel = std::fabs(v.x) / norm(v);
    zero_first = rel < kZeroComponent;
    if (rel < kSensitiveComponent) sensitive = true;
    if (zero_first) return {0.0, 1.0};
    return {1.0, v.y / v.x};
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

using Poly = std::vector<Vec2>;

Poly clip(const Poly& poly, const HalfPlane& h) {
    Poly out;
    if (poly.empty()) return out;
    auto val = [&](Vec2 p) { return h.a * p.x + h.b * p.y + h.c; };
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 cur = poly[i];
        const Vec2 nxt = poly[(i + 1) % poly.size()];
        const double vc = val(cur), vn = val(nxt);
        if (vc >= 0.0) out.push_back(cur);
        if ((vc >= 0.0) != (vn >= 0.0)) {
            const double s = vc / (vc - vn);
            out.push_back(cur + s * (nxt - cur));
        }
    }
    return out;
}

double area(const Poly& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec2 a = p[i], b = p[(i + 1) % p.size()];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::fabs(s);
}

}  // namespace

const char* to_string(LinearCase c) {
    switch (c) {
        case LinearCase::c1a:
            return "1a";
        case LinearCase::c1b:
            return "1b";
        case LinearCase::c1c:
            return "1c";
        case LinearCase::c2a:
            return "2a";
        case LinearCase::c2b:
            return "2b";
    }
    return "1c";
}

const char* to_string(EvcLabel e) {
    switch (e) {
        case EvcLabel::a:
            return "a";
        case EvcLabel::b:
            return "b";
        case EvcLabel::c:
            return "c";
        case EvcLabel::d:
            return "d";
        case EvcLabel::none:
            return "none";
    }
    return "none";
}

const char* to_string(LinearOutcome o) {
    switch (o) {
        case LinearOutcome::no:
            return "no";
        case LinearOutcome::yes_after:
            return "yes-after";
        case LinearOutcome::degenerate_tie:
            return "degenerate-tie";
    }
    return "no";
}

LinearAnalysis analyze(const Mat2& a) {
    LinearAnalysis an;
    an.a = a;
    Eigenvalues e = eigenvalues(a);
    // A defective matrix can round to a tiny imaginary part.
    if (e.complex && e.im <= kRepeatedTolerance * std::fabs(e.re1)) e.complex = false;
    if (e.complex) throw PreconditionError("A1", "eigenvalues are complex");
    if (e.re1 >= 0.0) throw PreconditionError("A1", "eigenvalues are not both negative");
    an.lambda1 = e.re1;
    an.lambda2 = e.re2;
    const double scale = std::max(std::fabs(e.re1), std::fabs(e.re2));
    const bool repeated = std::fabs(e.re1 - e.re2) < kRepeatedTolerance * scale;

    if (!repeated) {
        bool v0 = false, w0 = false;
        an.v = normalize_first(null_vector(a, an.lambda1), v0, an.boundary_sensitive);
        an.w = normalize_first(null_vector(a, an.lambda2), w0, an.boundary_sensitive);
        an.kase = v0 ? LinearCase::c1a : (w0 ? LinearCase::c1b : LinearCase::c1c);
    } else {
        const double lambda = 0.5 * (e.re1 + e.re2);
        an.lambda1 = an.lambda2 = lambda;
        const Mat2 n{a.a - lambda, a.b, a.c, a.d - lambda};
        const double nscale = std::max({std::fabs(n.a), std::fabs(n.b), std::fabs(n.c), std::fabs(n.d)});
        if (nscale <= kRepeatedTolerance * scale) {
            an.kase = LinearCase::c2a;
            an.v = {1.0, 0.0};
            an.w = {0.0, 1.0};
        } else {
            an.kase = LinearCase::c2b;
            bool v0 = false;
            an.v = normalize_first(null_vector(a, lambda), v0, an.boundary_sensitive);
            // Solve N vbar = v using the dominant row of the rank-one N.
            const bool row1 = std::hypot(n.a, n.b) >= std::hypot(n.c, n.d);
            const double ra = row1 ? n.a : n.c, rb = row1 ? n.b : n.d;
            const double rhs = row1 ? an.v.x : an.v.y;
            const double rr = ra * ra + rb * rb;
            Vec2 vbar{rhs * ra / rr, rhs * rb / rr};
            if (!v0) vbar = vbar - vbar.x * an.v;  // shift along v so vbar_1 = 0
            an.vbar = vbar;
            an.w = an.vbar;
        }
    }

    switch (an.kase) {
        case LinearCase::c1c: {
            const double v2 = an.v.y, w2 = an.w.y;
            if (v2 > 0.0 && w2 <= 0.0) {
                an.evc = EvcLabel::a;
            } else if (v2 > 0.0 && v2 < w2) {
                an.evc = EvcLabel::b;
            } else if (w2 > 0.0 && w2 < v2) {
                an.evc = EvcLabel::c;
            }
            break;
        }
        case LinearCase::c2b:
            if (an.v.x == 1.0 && an.v.y > 0.0 && an.vbar.x == 0.0) an.evc = EvcLabel::d;
            break;
        default:
            break;
    }
    return an;
}

Coefficients decompose_point(const LinearAnalysis& an, Vec2 p) {
    const Vec2 v = an.v, s = an.second();
    const double det = v.x * s.y - s.x * v.y;
    return {(s.y * p.x - s.x * p.y) / det, (-v.y * p.x + v.x * p.y) / det};
}

Vec2 LinearAnalysis::flow(Vec2 p, double t) const {
    const Coefficients c = decompose_point(*this, p);
    if (kase == LinearCase::c2b) {
        const double e = std::exp(lambda1 * t);
        return e * ((c.c1 + c.c2 * t) * v + c.c2 * vbar);
    }
    return (c.c1 * std::exp(lambda1 * t)) * v + (c.c2 * std::exp(lambda2 * t)) * w;
}

double linear_difference(const LinearAnalysis& an, Vec2 r0, Vec2 p0, double t) {
    return an.flow(r0, t).x - an.flow(p0, t).x;
}

LinearVerdict verdict_linear(const LinearAnalysis& an, Vec2 r0, Vec2 p0) {
    if (p0.x < r0.x) throw PreconditionError("A3", "x_p < x_r");
    // Nonnegativity of both closed-form trajectories on a log-spaced grid.
    const double tmax = kNonnegHorizon / std::fabs(an.lambda1);
    for (Vec2 start : {r0, p0}) {
        const double scale = std::max({1.0, std::fabs(start.x), std::fabs(start.y)});
        if (start.x < 0.0 || start.y < 0.0) throw PreconditionError("A2", "initial point outside the quadrant");
        for (int k = 0; k < kNonnegSamples; ++k) {
            const double t = tmax * std::pow(10.0, -6.0 * (1.0 - static_cast<double>(k) / (kNonnegSamples - 1)));
            const Vec2 q = an.flow(start, t);
            const double m = std::exp(an.lambda1 * t) * scale * 1e-12;
            if (q.x < -m || q.y < -m) throw PreconditionError("A2", "closed-form trajectory leaves the quadrant");
        }
        // Dominant term as t -> infinity.
        const Coefficients c = decompose_point(an, start);
        Vec2 lead;
        if (an.kase == LinearCase::c2b) {
            lead = std::fabs(c.c2) > 1e-14 * scale ? c.c2 * an.v : c.c1 * an.v;
        } else if (std::fabs(c.c1) > 1e-14 * scale && an.kase != LinearCase::c2a) {
            lead = c.c1 * an.v;
        } else {
            lead = an.kase == LinearCase::c2a ? start : c.c2 * an.w;
        }
        if (lead.x < -1e-12 * scale || lead.y < -1e-12 * scale) {
            throw PreconditionError("A2", "closed-form trajectory approaches the node from outside the quadrant");
        }
    }

    LinearVerdict out;
    out.ref = decompose_point(an, r0);
    out.pert = decompose_point(an, p0);
    const double c1 = out.ref.c1, c2 = out.ref.c2, d1 = out.pert.c1, d2 = out.pert.c2;
    switch (an.kase) {
        case LinearCase::c1a:
            out.rule = "slow eigenvector has zero first component; psi_1/phi_1 is constant";
            return out;
        case LinearCase::c1b:
            out.rule = "fast eigenvector has zero first component; psi_1/phi_1 is constant";
            return out;
        case LinearCase::c2a:
            out.rule = "scalar matrix; psi_1/phi_1 is constant";
            return out;
        case LinearCase::c1c: {
            const double scale = std::max({1.0, std::fabs(c1), std::fabs(d1)});
            if (r0 == p0) {
                out.rule = "identical initial points";
                return out;
            }
            if (std::fabs(c1 - d1) <= 1e-12 * scale) {
                out.outcome = LinearOutcome::degenerate_tie;
                out.rule = "slow coefficients agree to rounding";
                return out;
            }
            if (c1 > d1 && c2 < d2) {
                out.outcome = LinearOutcome::yes_after;
                out.onset_raw = std::log((d2 - c2) / (c1 - d1)) / (an.lambda1 - an.lambda2);
                out.onset = std::max(0.0, out.onset_raw);
                out.rule = "distinct eigenvalues: c1 > d1 and c2 < d2";
            } else {
                out.rule = "distinct eigenvalues: c1 <= d1 or c2 >= d2";
            }
            return out;
        }
        case LinearCase::c2b: {
            if (an.v.x == 0.0) {
                out.rule = "defective with v_1 = 0: vbar_1 != 0, psi_1/phi_1 is constant";
                return out;
            }
            if (c1 <= d1 && c2 > d2) {
                out.outcome = LinearOutcome::yes_after;
                out.onset_raw = (d1 - c1) / (c2 - d2);
                out.onset = out.onset_raw;
                out.max_depth = (d2 - c2) / (an.lambda1 * std::exp(1.0));
                out.max_depth_time = -1.0 / an.lambda1;
                out.rule = "defective with vbar_1 = 0: c1 <= d1 and c2 > d2";
            } else {
                out.rule = "defective with vbar_1 = 0: c2 <= d2";
            }
            return out;
        }
    }
    return out;
}

bool LinearRegion::contains(Vec2 p) const {
    for (const HalfPlane& h : constraints) {
        if (!h.contains(p)) return false;
    }
    return true;
}

std::string LinearRegion::describe() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const HalfPlane& h = constraints[i];
        if (i) os << " and ";
        os << fmt(h.a) << "*x + " << fmt(h.b) << "*y + " << fmt(h.c) << (h.strict ? " > 0" : " >= 0");
    }
    return os.str();
}

LinearRegion tolerance_region(const LinearAnalysis& an, Vec2 r0) {
    if (an.evc == EvcLabel::none) {
        throw std::invalid_argument("eigenvector configuration has no label; tolerance regions are undefined");
    }
    LinearRegion reg;
    const double scale = std::max({1.0, std::fabs(r0.x), std::fabs(r0.y)});
    const bool on_axis = std::fabs(r0.y) <= 1e-12 * scale;
    const double yv = an.v.y * r0.x;  // height of the weak eigenvector ray at x_r
    switch (an.evc) {
        case EvcLabel::a:
            reg.region_id = on_axis ? "1a" : (r0.y < yv ? "2a" : "3a");
            break;
        case EvcLabel::b:
            reg.region_id = on_axis ? "1b" : (r0.y < yv ? "2b" : (r0.y < an.w.y * r0.x ? "3b" : "outside"));
            break;
        case EvcLabel::c:
            reg.region_id = r0.y < an.w.y * r0.x ? "outside" : (r0.y <= yv ? "1c" : "2c");
            break;
        case EvcLabel::d:
            reg.region_id = r0.y >= yv ? "1d" : "outside";
            break;
        case EvcLabel::none:
            break;
    }

    const Coefficients c = decompose_point(an, r0);
    const Vec2 v = an.v, s = an.second();
    const double det = v.x * s.y - s.x * v.y;
    // d1(p) = (s2 x - s1 y)/det, d2(p) = (-v2 x + v1 y)/det.
    if (an.kase == LinearCase::c1c) {
        reg.constraints.push_back({-s.y / det, s.x / det, c.c1, true, "d1 < c1"});
        reg.constraints.push_back({-v.y / det, v.x / det, -c.c2, true, "d2 > c2"});
    } else {
        reg.constraints.push_back({s.y / det, -s.x / det, -c.c1, false, "d1 >= c1"});
        reg.constraints.push_back({v.y / det, -v.x / det, c.c2, true, "d2 < c2"});
    }
    reg.constraints.push_back({1.0, 0.0, -r0.x, false, "x >= x_r"});
    reg.constraints.push_back({1.0, 0.0, 0.0, false, "x >= 0"});
    reg.constraints.push_back({0.0, 1.0, 0.0, false, "y >= 0"});

    const double big = 1e6 * scale;
    Poly box{{0.0, 0.0}, {big, 0.0}, {big, big}, {0.0, big}};
    for (const HalfPlane& h : reg.constraints) box = clip(box, h);
    reg.empty = box.size() < 3 || area(box) <= 1e-14 * scale * scale;
    return reg;
}

std::string to_json(const LinearAnalysis& an) {
    nlohmann::json j;
    j["matrix"] = {an.a.a, an.a.b, an.a.c, an.a.d};
    j["lambda1"] = an.lambda1;
    j["lambda2"] = an.lambda2;
    j["case"] = to_string(an.kase);
    j["evc"] = to_string(an.evc);
    j["v"] = {an.v.x, an.v.y};
    if (an.kase == LinearCase::c2b) {
        j["vbar"] = {an.vbar.x, an.vbar.y};
    } else {
        j["w"] = {an.w.x, an.w.y};
    }
    j["boundary_sensitive"] = an.boundary_sensitive;
    return j.dump(2);
}

std::string to_json(const LinearVerdict& v) {
    nlohmann::json j;
    j["outcome"] = to_string(v.outcome);
    j["rule"] = v.rule;
    j["c"] = {v.ref.c1, v.ref.c2};
    j["d"] = {v.pert.c1, v.pert.c2};
    if (v.outcome == LinearOutcome::yes_after) {
        j["T"] = v.onset;
        j["T_raw"] = v.onset_raw;
        if (v.max_depth != 0.0) {
            j["max_depth"] = v.max_depth;
            j["max_depth_time"] = v.max_depth_time;
        }
    }
    return j.dump(2);
}

std::string to_json(const LinearRegion& r) {
    nlohmann::json j;
    j["region_id"] = r.region_id;
    j["empty"] = r.empty;
    nlohmann::json hs = nlohmann::json::array();
    for (const HalfPlane& h : r.constraints) {
        hs.push_back({{"a", h.a}, {"b", h.b}, {"c", h.c}, {"strict", h.strict}, {"label", h.label}});
    }
    j["half_planes"] = hs;
    j["description"] = r.describe();
    return j.dump(2);
}

}  // namespace tolkit
