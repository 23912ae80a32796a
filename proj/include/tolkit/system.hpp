#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tolkit/expr.hpp"
#include "tolkit/types.hpp"

namespace tolkit {

struct FieldValue {
    Vec2 value;
    bool ok = true;
    std::string error;
};

struct JacobianValue {
    Mat2 value;
    bool ok = true;
    std::string error;
};

// Eigenvalues of a real 2x2 matrix; for real pairs re1 >= re2.
struct Eigenvalues {
    bool complex = false;
    double re1 = 0.0;
    double re2 = 0.0;
    double im = 0.0;
};

[[nodiscard]] Eigenvalues eigenvalues(const Mat2& m);

enum class FixedPointClass { stable_node, saddle, stable_spiral, unstable_node, unstable_spiral, degenerate };

[[nodiscard]] const char* to_string(FixedPointClass c);

struct FixedPointReport {
    Vec2 location;
    Eigenvalues eig;
    FixedPointClass classification = FixedPointClass::degenerate;
    bool satisfies_A1 = false;
    double residual = 0.0;
};

[[nodiscard]] FixedPointReport classify_point(Vec2 p, const Mat2& jac);

class PlanarSystem {
public:
    enum class Kind { expression, linear };

    static PlanarSystem from_expressions(std::string name, const Expr& f, const Expr& g);
    static PlanarSystem from_matrix(std::string name, const Mat2& a);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] bool is_builtin() const { return builtin_; }
    [[nodiscard]] const Mat2& matrix() const { return a_; }
    [[nodiscard]] Vec2 node() const { return node_; }
    void set_node(Vec2 n) { node_ = n; }

    [[nodiscard]] const Expr& f() const { return f_; }
    [[nodiscard]] const Expr& g() const { return g_; }
    [[nodiscard]] const Expr& f_x() const { return fx_; }
    [[nodiscard]] const Expr& f_y() const { return fy_; }
    [[nodiscard]] const Expr& g_x() const { return gx_; }
    [[nodiscard]] const Expr& g_y() const { return gy_; }

    [[nodiscard]] FieldValue field(Vec2 p) const;
    // Hot path for integrators; false on a domain error.
    [[nodiscard]] bool field_fast(double x, double y, double& fx, double& gy) const noexcept;
    [[nodiscard]] bool f_fast(double x, double y, double& out) const noexcept;
    [[nodiscard]] bool fy_fast(double x, double y, double& out) const noexcept;
    [[nodiscard]] JacobianValue jacobian(Vec2 p) const;

private:
    friend PlanarSystem builtin(std::string_view name);

    Kind kind_ = Kind::expression;
    std::string name_;
    bool builtin_ = false;
    Mat2 a_;
    Vec2 node_{0.0, 0.0};
    Expr f_, g_, fx_, fy_, gx_, gy_;
};

// Registered systems: "ex2", "ex1", "ex3".
[[nodiscard]] PlanarSystem builtin(std::string_view name);
[[nodiscard]] std::vector<std::string> builtin_names();

class DefinitionError : public std::runtime_error {
public:
    DefinitionError(int line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
    [[nodiscard]] int line() const { return line_; }

private:
    int line_;
};

// Definition text: one key=value per line, '#' starts a comment.
// Keys: name, f, g, A (a11,a12,a21,a22), node (x,y). Either f and g, or A.
[[nodiscard]] PlanarSystem parse_system_definition(std::string_view text);
[[nodiscard]] PlanarSystem load_system_file(const std::string& path);

[[nodiscard]] JacobianValue jacobian_at(const PlanarSystem& sys, Vec2 p);
[[nodiscard]] double isocline_value(const PlanarSystem& sys, Vec2 p);

struct FixedPointSearch {
    Box box{0.0, 1.0, 0.0, 1.0};
    int grid = 8;
    int max_iterations = 50;
    double dedupe = 1e-6;
};

[[nodiscard]] std::vector<FixedPointReport> find_fixed_points(const PlanarSystem& sys, const FixedPointSearch& search);

// Node check used by the tolerance analyses: stable with real negative eigenvalues.
[[nodiscard]] FixedPointReport node_report(const PlanarSystem& sys);

}  // namespace tolkit
