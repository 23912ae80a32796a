#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tolkit/system.hpp"
#include "tolkit/types.hpp"

namespace tolkit {

enum class Direction { forward, backward };

enum class Termination {
    horizon,
    entered_ball,
    left_domain,
    axis_crossing,
    event_target,
    step_underflow,
    domain_error,
    stalled,
    step_limit
};

[[nodiscard]] const char* to_string(Termination t);

enum class EventKind { f_sign_change, g_sign_change, x_equals, y_equals, x_extremum, y_extremum };

[[nodiscard]] const char* to_string(EventKind k);

struct Event {
    double time = 0.0;
    Vec2 point;
    EventKind kind = EventKind::f_sign_change;
    double value = 0.0;  // level for x_equals / y_equals
    int direction = 0;   // +1 when the defining function increases through zero
};

struct EventRequest {
    EventKind kind = EventKind::f_sign_change;
    double value = 0.0;
    bool terminal = false;
    int direction = 0;  // 0 accepts both crossing directions
    Termination reason = Termination::event_target;
};

struct IntegrationOptions {
    double horizon = 1000.0;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double eps_ball = 1e-6;
    double eps_neg = 1e-9;
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 2'000'000;
    Direction direction = Direction::forward;
    bool stop_at_ball = true;
    std::optional<Vec2> ball_center;  // defaults to the system node
    bool quadrant_guard = false;      // terminate with left_domain below -eps_neg
    std::optional<Box> domain;
    double blowup = 1e12;
    // Terminates with `stalled` when a Newton step locates a fixed point other than the ball center.
    bool detect_stall = false;
    std::vector<EventRequest> events;
};

// Dense-output solution. Times are strictly monotone in the flow direction.
class Trajectory {
public:
    [[nodiscard]] std::size_t size() const { return t_.size(); }
    [[nodiscard]] bool empty() const { return t_.empty(); }
    [[nodiscard]] double t(std::size_t k) const { return t_[k]; }
    [[nodiscard]] Vec2 point(std::size_t k) const { return {x_[k], y_[k]}; }
    [[nodiscard]] const std::vector<double>& times() const { return t_; }
    [[nodiscard]] const std::vector<double>& xs() const { return x_; }
    [[nodiscard]] const std::vector<double>& ys() const { return y_; }
    [[nodiscard]] double t_begin() const { return t_.front(); }
    [[nodiscard]] double t_end() const { return t_.back(); }
    [[nodiscard]] Vec2 initial() const { return point(0); }
    [[nodiscard]] Vec2 final_point() const { return point(size() - 1); }
    [[nodiscard]] Direction direction() const { return direction_; }
    [[nodiscard]] Termination termination() const { return termination_; }
    [[nodiscard]] const std::string& message() const { return message_; }
    [[nodiscard]] const std::vector<Event>& events() const { return events_; }
    [[nodiscard]] bool quadrant_violation() const { return quadrant_violation_; }
    [[nodiscard]] std::size_t rejected_steps() const { return rejected_; }

    // Dense evaluation; t is clamped to the covered interval.
    [[nodiscard]] Vec2 eval(double t) const;
    [[nodiscard]] bool covers(double t) const;

    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] std::string events_json() const;

private:
    friend class Integrator;

    struct StepCoeffs {
        double h;
        std::array<double, 5> cx;
        std::array<double, 5> cy;
    };

    [[nodiscard]] std::size_t locate(double t) const;

    std::vector<double> t_, x_, y_;
    std::vector<StepCoeffs> steps_;
    std::vector<Event> events_;
    Direction direction_ = Direction::forward;
    Termination termination_ = Termination::horizon;
    std::string message_;
    bool quadrant_violation_ = false;
    std::size_t rejected_ = 0;
};

// Embedded Dormand-Prince 5(4) with PI step control and dense output.
[[nodiscard]] Trajectory integrate(const PlanarSystem& sys, Vec2 p0, const IntegrationOptions& opts = {});

// Backward flow until the orbit meets y = 0 or x = 0.
[[nodiscard]] Trajectory integrate_backward_to_axis(const PlanarSystem& sys, Vec2 p0, double horizon = 50.0);

struct BasinResult {
    bool inside = false;
    bool conclusive = true;
    Termination reason = Termination::entered_ball;
    explicit operator bool() const { return inside; }
};

[[nodiscard]] BasinResult in_basin(const PlanarSystem& sys, Vec2 p0, Vec2 fp, const IntegrationOptions& opts = {});

}  // namespace tolkit
