#pragma once

#include <string>
#include <vector>

#include "tolkit/types.hpp"

namespace tolkit {

enum class LinearCase { c1a, c1b, c1c, c2a, c2b };
enum class EvcLabel { a, b, c, d, none };

[[nodiscard]] const char* to_string(LinearCase c);
[[nodiscard]] const char* to_string(EvcLabel e);

// Eigenstructure of x' = A x with real negative eigenvalues lambda2 <= lambda1 < 0.
struct LinearAnalysis {
    Mat2 a;
    double lambda1 = 0.0;  // weak (slow)
    double lambda2 = 0.0;  // strong (fast)
    Vec2 v;                // eigenvector for lambda1
    Vec2 w;                // eigenvector for lambda2; unused in case 2b
    Vec2 vbar;             // generalized eigenvector, case 2b only
    LinearCase kase = LinearCase::c1c;
    EvcLabel evc = EvcLabel::none;
    bool boundary_sensitive = false;  // a first component sits near the 0/1 threshold

    // Basis used for coefficients: (v, w), or (v, vbar) in case 2b.
    [[nodiscard]] Vec2 second() const { return kase == LinearCase::c2b ? vbar : w; }
    // Closed-form solution from p at time t.
    [[nodiscard]] Vec2 flow(Vec2 p, double t) const;
};

// Throws PreconditionError("A1") for complex or nonnegative eigenvalues.
[[nodiscard]] LinearAnalysis analyze(const Mat2& a);

struct Coefficients {
    double c1 = 0.0;
    double c2 = 0.0;
};

[[nodiscard]] Coefficients decompose_point(const LinearAnalysis& an, Vec2 p);

enum class LinearOutcome { no, yes_after, degenerate_tie };

[[nodiscard]] const char* to_string(LinearOutcome o);

struct LinearVerdict {
    LinearOutcome outcome = LinearOutcome::no;
    double onset = 0.0;      // T, clamped to >= 0
    double onset_raw = 0.0;  // unclamped closed-form value
    double max_depth = 0.0;  // case 2b: largest value of the bound (c2 - d2) t e^{lambda t}
    double max_depth_time = 0.0;
    Coefficients ref;
    Coefficients pert;
    std::string rule;  // which closed-form argument decided the verdict
};

// Throws PreconditionError for A2 (closed-form trajectory leaves the quadrant)
// or A3 (x_p < x_r).
[[nodiscard]] LinearVerdict verdict_linear(const LinearAnalysis& an, Vec2 r0, Vec2 p0);

// Closed-form phi_1(t) - psi_1(t).
[[nodiscard]] double linear_difference(const LinearAnalysis& an, Vec2 r0, Vec2 p0, double t);

// a*x + b*y + c > 0 (strict) or >= 0.
struct HalfPlane {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    bool strict = true;
    std::string label;

    [[nodiscard]] bool contains(Vec2 p) const {
        const double s = a * p.x + b * p.y + c;
        return strict ? s > 0.0 : s >= 0.0;
    }
};

struct LinearRegion {
    std::string region_id;  // position of r0 within its eigenvector configuration, e.g. "2a"
    bool empty = true;
    std::vector<HalfPlane> constraints;

    [[nodiscard]] bool contains(Vec2 p) const;
    [[nodiscard]] std::string describe() const;
};

// Set of p0 producing tolerance against r0, as an intersection of half-planes.
// Throws std::invalid_argument when the configuration has no label.
[[nodiscard]] LinearRegion tolerance_region(const LinearAnalysis& an, Vec2 r0);

[[nodiscard]] std::string to_json(const LinearAnalysis& an);
[[nodiscard]] std::string to_json(const LinearVerdict& v);
[[nodiscard]] std::string to_json(const LinearRegion& r);

}  // namespace tolkit
