#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tolkit/integrate.hpp"
#include "tolkit/system.hpp"

namespace tolkit {

// One x-monotone graph segment between consecutive breakpoints.
struct GraphSegment {
    double x_begin = 0.0;
    double x_end = 0.0;
    double t_begin = 0.0;
    double t_end = 0.0;
    double sup_speed = 0.0;  // sup |f| on [t_begin, t_end)
    double inf_speed = 0.0;  // inf |f| on [t_begin, t_end)
    double end_speed = 0.0;  // |f| at the closing breakpoint
    Vec2 sup_at;
    Vec2 inf_at;

    [[nodiscard]] double dt() const { return t_end - t_begin; }
};

struct SegmentDecomposition {
    Vec2 start;
    double x_f = 0.0;
    std::vector<GraphSegment> segments;
    double passage_time = 0.0;  // first time phi_1 = x_f
    Vec2 end;
    Trajectory trajectory;

    [[nodiscard]] std::vector<double> breakpoints() const;
    [[nodiscard]] std::string to_json() const;
};

// Breakpoints at f sign changes, terminal breakpoint at the first crossing of x = x_f.
// Throws std::runtime_error naming the attained x-range when x_f is never reached.
[[nodiscard]] SegmentDecomposition decompose_segments(const PlanarSystem& sys, Vec2 start, double x_f,
                                                      const IntegrationOptions& opts = {});

struct BoundReport {
    double lower_t_phi = 0.0;  // sum |dx| / sup|f| over phi
    double upper_t_psi = 0.0;  // sum |dx| / inf|f| over psi
    double t_phi = 0.0;        // measured passage times
    double t_psi = 0.0;
    bool condition = false;  // upper_t_psi < lower_t_phi
    bool unbounded = false;  // some psi segment has inf|f| = 0
    std::string flag;
    std::optional<double> xhat_M;
    double C_r = 0.0;
    double C_f = std::numeric_limits<double>::quiet_NaN();  // sup |f| on the last phi segment
    double C_f_endpoint = std::numeric_limits<double>::quiet_NaN();  // |f(x_f, y_f)|
    double C_psi = 0.0;
    double x_r = 0.0;
    double x_p = 0.0;
    double x_M = 0.0;
    double y_M = 0.0;
    double x_f = 0.0;
    double y_f = 0.0;

    [[nodiscard]] std::string to_json() const;
};

// Throws std::invalid_argument when the terminal x_f differs.
[[nodiscard]] BoundReport passage_time_bounds(const SegmentDecomposition& phi, const SegmentDecomposition& psi);

// x_M + (C_psi - C_f)/C_f (x_M - x_f) + C_psi/C_r (x_M - x_r). Throws std::invalid_argument.
[[nodiscard]] double expanded_bound_xhatM(double C_r, double C_f, double C_psi, double x_r, double x_M, double x_f);

// Integral of du / (u^2/(1+w) - u) from a to b in closed form. Throws DomainError.
[[nodiscard]] double delta_fn(double w, double a, double b);

enum class ConditionStatus { holds, fails, inapplicable };

[[nodiscard]] const char* to_string(ConditionStatus s);

struct Example2Condition {
    ConditionStatus status = ConditionStatus::inapplicable;
    std::string reason;
    double lhs = std::numeric_limits<double>::quiet_NaN();
    double rhs = std::numeric_limits<double>::quiet_NaN();
    double y_b = std::numeric_limits<double>::quiet_NaN();
    double x_M = 0.0;
    double x_f = 0.0;
    double y_f = 0.0;

    [[nodiscard]] std::string to_json() const;
};

// Closed-form sufficient condition for ex2. Pass x_M = x_r for a non-excitable reference.
// Throws std::invalid_argument for any other system.
[[nodiscard]] Example2Condition example2_tolerance_condition(const PlanarSystem& sys, Vec2 r0, Vec2 p0, double x_M,
                                                             double x_f, double y_f);

// Right side of the ex2 condition at y; decreasing in y when x_p > x_f.
[[nodiscard]] double example2_rhs(double y, double x_p, double x_f);

struct ReferenceExtremes {
    double x_M = 0.0;  // max phi_1, or x_r when the reference is not excitable
    double y_M = 0.0;
    double x_f = 0.0;  // x at max phi_2
    double y_f = 0.0;
    bool excitable = false;
};

[[nodiscard]] ReferenceExtremes reference_extremes(const PlanarSystem& sys, Vec2 r0,
                                                   const IntegrationOptions& opts = {});

struct EstimateOptions {
    std::optional<double> x_f;  // defaults to the x at max phi_2
    IntegrationOptions integration;
};

struct EstimateReport {
    Vec2 r0;
    Vec2 p0;
    ReferenceExtremes extremes;
    double x_f = 0.0;
    std::optional<SegmentDecomposition> phi;
    std::optional<SegmentDecomposition> psi;
    std::optional<BoundReport> bounds;
    std::string bounds_error;
    std::optional<Example2Condition> example2;

    [[nodiscard]] std::string to_json() const;
};

[[nodiscard]] EstimateReport estimate(const PlanarSystem& sys, Vec2 r0, Vec2 p0, const EstimateOptions& opts = {});

}  // namespace tolkit
