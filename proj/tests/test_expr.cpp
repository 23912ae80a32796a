#include <catch2/catch_amalgamated.hpp>

#include "support/fd_check.hpp"
#include "support/random_expr.hpp"
#include "tolkit/expr.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

using namespace tolkit;
using Catch::Approx;

namespace {

double eval_ok(const Expr& e, double x, double y) {
    const EvalResult r = e.eval(x, y);
    REQUIRE(r.ok);
    return r.value;
}

}  // namespace

TEST_CASE("parse and evaluate basic expressions", "[expr]") {
    CHECK(eval_ok(parse_expr("x^2/(1+y) - x"), 4.0, 0.0) == 12.0);
    CHECK(eval_ok(parse_expr("0"), 3.0, -7.0) == 0.0);
    CHECK(eval_ok(parse_expr("x*( (1+y^2)/(1-y+y^2) - 1.9 )"), 1.0, 1.0) == Approx(0.1).margin(1e-15));
    CHECK(eval_ok(parse_expr("(0.5*x - y)*(0.1*x/(1+y) - 1)"), 2.0, 0.5) == Approx(-13.0 / 30.0).epsilon(1e-15));
    CHECK(eval_ok(parse_expr("x - y"), 0.72, 0.72) == 0.0);
}

TEST_CASE("operator precedence and associativity", "[expr]") {
    CHECK(eval_ok(parse_expr("2+3*4"), 0, 0) == 14.0);
    CHECK(eval_ok(parse_expr("2^3^2"), 0, 0) == 512.0);
    CHECK(eval_ok(parse_expr("-2^2"), 0, 0) == -4.0);
    CHECK(eval_ok(parse_expr("2^-1"), 0, 0) == 0.5);
    CHECK(eval_ok(parse_expr("8/4/2"), 0, 0) == 1.0);
    CHECK(eval_ok(parse_expr("8-4-2"), 0, 0) == 2.0);
    CHECK(eval_ok(parse_expr("  x\t*  y "), 3, 5) == 15.0);
    CHECK(eval_ok(parse_expr(".5*x"), 4, 0) == 2.0);
    CHECK(eval_ok(parse_expr("exp(0) + log(1) + sqrt(4) + abs(-3)"), 0, 0) == 6.0);
}

TEST_CASE("parse errors carry offsets and identifiers", "[expr]") {
    SECTION("empty input") {
        try {
            (void)parse_expr("   ");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseError::Kind::empty);
        }
    }
    SECTION("unknown identifier") {
        try {
            (void)parse_expr("x + sin(y)");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseError::Kind::unknown_identifier);
            CHECK(e.identifier() == "sin");
            CHECK(e.offset() == 4);
        }
    }
    SECTION("implicit multiplication is rejected") {
        try {
            (void)parse_expr("0.5x");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseError::Kind::syntax);
            CHECK(e.offset() == 3);
            CHECK_FALSE(e.expected().empty());
        }
    }
    SECTION("unbalanced parenthesis") {
        try {
            (void)parse_expr("(x+1");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseError::Kind::syntax);
            CHECK(e.offset() == 4);
        }
    }
}

TEST_CASE("domain errors are reported as values", "[expr]") {
    const EvalResult div = parse_expr("x^2/(1+y) - x").eval(1.0, -1.0);
    CHECK_FALSE(div.ok);
    CHECK_FALSE(div.error.empty());
    CHECK_FALSE(div.subexpr.empty());
    CHECK_FALSE(parse_expr("log(x)").eval(0.0, 0.0).ok);
    CHECK_FALSE(parse_expr("sqrt(y)").eval(0.0, -1.0).ok);
    CHECK_FALSE(parse_expr("x^0.5").eval(-1.0, 0.0).ok);
    double out = 0.0;
    CHECK_FALSE(parse_expr("1/x").try_eval(0.0, 0.0, out));
}

TEST_CASE("symbolic derivatives of the builtin fields", "[expr][diff]") {
    const Expr f = parse_expr("x^2/(1+y) - x");
    const Expr fy = differentiate(f, Var::y);
    CHECK(eval_ok(fy, 1.0, 0.0) == Approx(-1.0).epsilon(1e-14));
    const auto cmp = tolkit_test::compare_with_fd(f, fy, Var::y, 1.0, 0.0);
    REQUIRE(cmp.usable);
    CHECK(std::fabs(cmp.symbolic - cmp.numeric) < 1e-6);

    const Expr dy = differentiate(parse_expr("y"), Var::x);
    CHECK(dy.is_zero());

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int i = 0; i < 100; ++i) {
        CHECK(eval_ok(fy, u(rng), u(rng)) < 0.0);
    }
}

TEST_CASE("derivative agrees with finite differences on random expressions", "[expr][diff][property]") {
    tolkit_test::RandomExprGen gen(20240611);
    int checked = 0;
    int worst_index = -1;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Expr e = parse_expr(gen.make(3));
        const Var v = (i % 2 == 0) ? Var::x : Var::y;
        const Expr de = differentiate(e, v);
        for (int k = 0; k < 3; ++k) {
            const auto cmp = tolkit_test::compare_with_fd(e, de, v, gen.uniform(0.1, 2.0), gen.uniform(0.1, 2.0));
            if (!cmp.usable) continue;
            ++checked;
            if (cmp.rel_error > worst) {
                worst = cmp.rel_error;
                worst_index = i;
            }
        }
    }
    INFO("worst relative error " << worst << " at expression " << worst_index);
    CHECK(checked > 2500);
    CHECK(worst <= 1e-5);
}

TEST_CASE("print then parse preserves values", "[expr][property]") {
    tolkit_test::RandomExprGen gen(99);
    for (int i = 0; i < 200; ++i) {
        const Expr e = parse_expr(gen.make(3));
        const Expr back = parse_expr(e.to_string());
        const Expr d = differentiate(e, Var::x);
        const Expr dback = parse_expr(d.to_string());
        for (int k = 0; k < 5; ++k) {
            const double x = gen.uniform(0.1, 2.0), y = gen.uniform(0.1, 2.0);
            double a, b;
            if (!e.try_eval(x, y, a)) continue;
            REQUIRE(back.try_eval(x, y, b));
            CHECK(a == Approx(b).epsilon(1e-14).margin(1e-300));
            if (d.try_eval(x, y, a) && dback.try_eval(x, y, b)) {
                CHECK(a == Approx(b).epsilon(1e-14).margin(1e-300));
            }
        }
    }
}

TEST_CASE("evaluation is deterministic", "[expr]") {
    const Expr e = parse_expr("x*((1+y^2)/(1-y+y^2) - 1.9)");
    const double a = eval_ok(e, 0.3141, 2.718);
    const double b = eval_ok(e, 0.3141, 2.718);
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
}
