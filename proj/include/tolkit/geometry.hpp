#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tolkit/integrate.hpp"
#include "tolkit/system.hpp"

namespace tolkit {

// n-excitability of the reference trajectory and its landmarks.
struct ExcitabilityReport {
    int n = 0;  // 0 = not excitable
    Vec2 r0;
    std::vector<double> switch_times;  // t_e0 = 0 followed by every sign change of f
    std::vector<Vec2> switch_points;
    double t_r = std::numeric_limits<double>::quiet_NaN();  // first return of phi_1 to x_r
    double y_at_tr = std::numeric_limits<double>::quiet_NaN();
    double M = 0.0;  // max phi_1
    double t_m = 0.0;
    double t_M = 0.0;
    double y_at_tM = 0.0;
    bool cond_a = false;  // phi_1(t_ei) > x_r
    bool cond_b = false;  // g > 0 through t_e(2n-1)
    bool cond_c = false;  // alternating sign pattern of f
    std::string failure;  // first violated condition when n = 0
    Trajectory trajectory;

    [[nodiscard]] std::string to_json() const;
};

// Throws PreconditionError for A1/A2 failures.
[[nodiscard]] ExcitabilityReport classify_excitable(const PlanarSystem& sys, Vec2 r0,
                                                    const IntegrationOptions& opts = {});

// T = G u S: the loop bounded by the graph of phi on (0, t_r] and the
// vertical segment L = {x_r} x (y_r, phi_2(t_r)].
class LoopRegion {
public:
    // Throws std::invalid_argument when the report is not excitable or t_r is missing.
    static LoopRegion build(const ExcitabilityReport& report);

    [[nodiscard]] bool contains(Vec2 p) const;
    [[nodiscard]] const std::vector<Vec2>& graph() const { return graph_; }
    [[nodiscard]] Vec2 anchor() const { return anchor_; }
    [[nodiscard]] double top() const { return top_; }
    [[nodiscard]] double xmax() const { return xmax_; }
    [[nodiscard]] std::string to_json() const;

private:
    [[nodiscard]] std::size_t row_of(double y) const;

    std::vector<Vec2> graph_;  // phi(t) for t in [0, t_r]; the first point is excluded from G
    std::vector<std::vector<std::uint32_t>> rows_;  // segment index by horizontal band
    double y_min_ = 0.0;
    double row_height_ = 1.0;
    Vec2 anchor_;
    double top_ = 0.0;
    double xmax_ = 0.0;
};

struct StripCheckOptions {
    int grid = 100;
    double y_extent = 0.0;  // sampled height above phi_2(t_M); 0 picks one from the orbit
};

// Outcome of sampling f over the strip (without the basin clip).
struct StripCheck {
    bool f_nonpositive = false;
    int samples = 0;
    int violations = 0;
    double worst_f = -std::numeric_limits<double>::infinity();
    Vec2 worst;
    double y_max = 0.0;
};

// T-hat = ((x_r, M) x (phi_2(t_M), inf) \ T) within the basin of the node.
class StripRegion {
public:
    static StripRegion build(const PlanarSystem& sys, const ExcitabilityReport& report, const LoopRegion& loop,
                             const StripCheckOptions& check = {}, const IntegrationOptions& opts = {});

    // Basin membership is evaluated per query.
    [[nodiscard]] bool contains(Vec2 p) const;
    [[nodiscard]] bool in_strip(Vec2 p) const;
    [[nodiscard]] const StripCheck& check() const { return check_; }
    [[nodiscard]] double x_lo() const { return x_lo_; }
    [[nodiscard]] double x_hi() const { return x_hi_; }
    [[nodiscard]] double y_lo() const { return y_lo_; }
    [[nodiscard]] std::string to_json() const;

private:
    StripRegion(PlanarSystem sys, LoopRegion loop) : sys_(std::move(sys)), loop_(std::move(loop)) {}

    PlanarSystem sys_;
    LoopRegion loop_;
    IntegrationOptions opts_;
    double x_lo_ = 0.0, x_hi_ = 0.0, y_lo_ = 0.0;
    StripCheck check_;
};

enum class Inhibition { inhibiting, non_inhibiting, boundary };

[[nodiscard]] const char* to_string(Inhibition i);

// Sign of f_y at p; |f_y| < 1e-10 is a boundary point. Throws DomainError.
[[nodiscard]] Inhibition inhibition_sign(const PlanarSystem& sys, Vec2 p);

// A pair of graph points with equal first component.
struct EqualXPair {
    Vec2 phi;
    Vec2 psi;
};

// Samples equal-x pairs over every pair of x-monotone pieces of the two graphs.
[[nodiscard]] std::vector<EqualXPair> equal_x_pairs(const Trajectory& phi, const Trajectory& psi,
                                                    int samples_per_piece = 512);

enum class GraphOrder { below, above, neither };

[[nodiscard]] const char* to_string(GraphOrder o);

struct OrderReport {
    GraphOrder order = GraphOrder::neither;
    bool empty_range = false;
    std::size_t higher = 0;  // pairs with psi_2 > phi_2
    std::size_t lower = 0;
    std::size_t ties = 0;
};

// below: psi is bounded below by phi (psi_2 > phi_2 at equal x); above: the reverse.
[[nodiscard]] OrderReport bounded_order(const Trajectory& phi, const Trajectory& psi);

enum class PredictionKind { guaranteed, impossible, possible };

[[nodiscard]] const char* to_string(PredictionKind k);

struct Prediction {
    PredictionKind kind = PredictionKind::possible;
    std::string rule;  // excitable-loop, strip-above-loop, bounded-below-no-inhibition, ...
    std::string detail;
    GraphOrder order = GraphOrder::neither;
    std::size_t sampled_pairs = 0;

    [[nodiscard]] std::string to_json() const;
};

struct GeometryOptions {
    IntegrationOptions integration;
    StripCheckOptions strip;
    int samples_per_piece = 512;
};

// Decision cascade for one reference point; classify() is const and reentrant.
class CandidateClassifier {
public:
    CandidateClassifier(const PlanarSystem& sys, Vec2 r0, const GeometryOptions& opts = {});

    [[nodiscard]] Prediction classify(Vec2 p0) const;

    [[nodiscard]] const ExcitabilityReport& report() const { return report_; }
    [[nodiscard]] const std::optional<LoopRegion>& loop() const { return loop_; }
    [[nodiscard]] const std::optional<StripRegion>& strip() const { return strip_; }
    [[nodiscard]] const PlanarSystem& system() const { return sys_; }
    [[nodiscard]] Vec2 reference() const { return r0_; }

private:
    PlanarSystem sys_;
    Vec2 r0_;
    GeometryOptions opts_;
    ExcitabilityReport report_;
    std::optional<LoopRegion> loop_;
    std::optional<StripRegion> strip_;
};

[[nodiscard]] Prediction classify_candidate(const PlanarSystem& sys, Vec2 r0, Vec2 p0,
                                            const GeometryOptions& opts = {});

}  // namespace tolkit
