#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tolkit/integrate.hpp"
#include "tolkit/system.hpp"

namespace tolkit {

enum class Outcome { tolerance, no_tolerance, inconclusive };
enum class Justification { none, horizon_asymptotic, group_property, analytic, tail };

[[nodiscard]] const char* to_string(Outcome o);
[[nodiscard]] const char* to_string(Justification j);

struct ToleranceOptions {
    IntegrationOptions integration;
    double eps_tol = 1e-7;
    double tie_tolerance = 1e-10;
    // Trajectories that stop at the horizon within this distance of the node
    // are handed to the linearization anyway.
    double linear_radius = 1e-3;
    bool use_group_property = false;
};

// Asymptotic comparison of the first components at the node.
struct TailReport {
    bool used = false;
    double handoff_time = 0.0;   // common time where both trajectories are linearized
    double slow_rate = 0.0;      // lambda_1 (closer to zero)
    double fast_rate = 0.0;      // lambda_2
    bool slow_mode_visible = true;  // false when the first row of J - lambda_2 I vanishes
    double phi_amplitude = 0.0;  // leading x-coefficient of phi, referred back to t = 0
    double psi_amplitude = 0.0;
    int sign_at_infinity = 0;    // sign of psi_1 - phi_1 as t -> infinity
    double crossing = std::numeric_limits<double>::quiet_NaN();  // zero of the linear tail, if any
};

struct ToleranceVerdict {
    Outcome outcome = Outcome::inconclusive;
    Justification justification = Justification::none;
    std::string reason;
    double t1 = std::numeric_limits<double>::quiet_NaN();
    double tau = std::numeric_limits<double>::quiet_NaN();
    double t2 = std::numeric_limits<double>::quiet_NaN();  // +inf when the window never closes
    double depth = 0.0;   // phi_1(tau) - psi_1(tau)
    double margin = 0.0;  // max over sampled t of phi_1 - psi_1
    double horizon = 0.0;
    std::vector<std::string> assumptions_checked;
    TailReport tail;

    [[nodiscard]] std::string to_json() const;
};

// Decides whether psi_1 ever drops below phi_1 for phi(0) = r0, psi(0) = p0.
// Throws PreconditionError when the node is not a stable node (A1), a
// trajectory leaves the quadrant or the basin (A2), or x_p < x_r (A3).
[[nodiscard]] ToleranceVerdict detect_tolerance(const PlanarSystem& sys, Vec2 r0, Vec2 p0,
                                                const ToleranceOptions& opts = {});

// True when p0 lies on the backward orbit of r0 and both first components
// decrease monotonically, which rules tolerance out.
[[nodiscard]] bool check_group_property_no_tolerance(const PlanarSystem& sys, Vec2 r0, Vec2 p0,
                                                     const IntegrationOptions& opts = {});

struct RobustnessReport {
    double requested_radius = 0.0;
    double radius = 0.0;  // radius at which the reported fraction was measured
    int halvings = 0;
    std::size_t samples_ref = 0;
    std::size_t samples_pert = 0;
    std::size_t rejected = 0;  // samples outside the admissible set
    double fraction_ref = 1.0;
    double fraction_pert = 1.0;
    double fraction = 1.0;
    std::uint64_t seed = 0;
};

[[nodiscard]] RobustnessReport robustness_balls(const PlanarSystem& sys, Vec2 r0, Vec2 p0,
                                                const ToleranceVerdict& verdict, std::size_t n_samples,
                                                double radius, std::uint64_t seed = 1,
                                                const ToleranceOptions& opts = {});

// Exact flow of the linearization at the node: node + exp(J s) (p - node).
class NodeLinearization {
public:
    explicit NodeLinearization(const PlanarSystem& sys);
    [[nodiscard]] Vec2 propagate(Vec2 p, double s) const;
    [[nodiscard]] const Mat2& jacobian() const { return j_; }
    [[nodiscard]] double slow() const { return l1_; }
    [[nodiscard]] double fast() const { return l2_; }
    [[nodiscard]] bool repeated() const { return repeated_; }

private:
    Vec2 node_;
    Mat2 j_;
    double l1_ = 0.0, l2_ = 0.0;
    bool repeated_ = false;
};

}  // namespace tolkit
