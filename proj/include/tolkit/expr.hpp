#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tolkit {

enum class Var { x, y };
enum class Func { exp, log, sqrt, abs };

enum class Op { constant, variable, neg, add, sub, mul, div, pow, func };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::constant;
    double value = 0.0;
    Var var = Var::x;
    Func func = Func::exp;
    NodePtr lhs;
    NodePtr rhs;
};

struct EvalResult {
    double value = 0.0;
    bool ok = true;
    std::string error;
    std::string subexpr;

    explicit operator bool() const { return ok; }
};

// Immutable expression tree in x and y.
class Expr {
public:
    Expr();
    explicit Expr(NodePtr root);

    static Expr constant(double v);
    static Expr variable(Var v);

    [[nodiscard]] EvalResult eval(double x, double y) const;
    // Returns false and leaves `out` unspecified on a domain error.
    [[nodiscard]] bool try_eval(double x, double y, double& out) const noexcept;

    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] const Node& root() const { return *root_; }
    [[nodiscard]] const NodePtr& ptr() const { return root_; }
    [[nodiscard]] bool is_constant() const;
    [[nodiscard]] bool is_zero() const;

private:
    NodePtr root_;
};

class ParseError : public std::runtime_error {
public:
    enum class Kind { syntax, unknown_identifier, empty };

    ParseError(Kind kind, std::size_t offset, std::vector<std::string> expected, std::string identifier,
               const std::string& message);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] std::size_t offset() const { return offset_; }
    [[nodiscard]] const std::vector<std::string>& expected() const { return expected_; }
    [[nodiscard]] const std::string& identifier() const { return identifier_; }

private:
    Kind kind_;
    std::size_t offset_;
    std::vector<std::string> expected_;
    std::string identifier_;
};

// Grammar: sum := prod (('+'|'-') prod)*; prod := unary (('*'|'/') unary)*;
// unary := '-' unary | '+' unary | power; power := atom ('^' unary)?  (so ^ is
// right-associative and binds tighter than unary minus); atom := number |
// x | y | fn '(' sum ')' | '(' sum ')'. Implicit multiplication is rejected.
[[nodiscard]] Expr parse_expr(std::string_view text);

[[nodiscard]] Expr differentiate(const Expr& e, Var v);

// Smart constructors with light simplification (constant folding, 0/1 rules).
[[nodiscard]] Expr make_neg(const Expr& a);
[[nodiscard]] Expr make_add(const Expr& a, const Expr& b);
[[nodiscard]] Expr make_sub(const Expr& a, const Expr& b);
[[nodiscard]] Expr make_mul(const Expr& a, const Expr& b);
[[nodiscard]] Expr make_div(const Expr& a, const Expr& b);
[[nodiscard]] Expr make_pow(const Expr& a, const Expr& b);
[[nodiscard]] Expr make_func(Func f, const Expr& a);

[[nodiscard]] const char* func_name(Func f);

}  // namespace tolkit
