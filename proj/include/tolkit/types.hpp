#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace tolkit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

// Row-major 2x2 matrix ((a, b), (c, d)).
struct Mat2 {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;

    [[nodiscard]] Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    [[nodiscard]] double trace() const { return a + d; }
    [[nodiscard]] double det() const { return a * d - b * c; }
};

struct Box {
    double xmin = 0.0;
    double xmax = 1.0;
    double ymin = 0.0;
    double ymax = 1.0;

    [[nodiscard]] bool contains(Vec2 p) const {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
};

// Raised when an analysis precondition (node stability, nonnegativity,
// basin membership, x_p >= x_r) does not hold.
class PreconditionError : public std::runtime_error {
public:
    PreconditionError(std::string assumption, const std::string& message)
        : std::runtime_error(assumption + ": " + message), assumption_(std::move(assumption)) {}

    [[nodiscard]] const std::string& assumption() const { return assumption_; }

private:
    std::string assumption_;
};

// Raised on field evaluation outside the expression domain.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tolkit
