#pragma once

#include <algorithm>
#include <cmath>

#include "tolkit/expr.hpp"

namespace tolkit_test {

struct FdComparison {
    bool usable = false;  // false when the point is too close to a singularity
    double symbolic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

// Central finite difference with a step-halving consistency gate.
inline FdComparison compare_with_fd(const tolkit::Expr& e, const tolkit::Expr& de, tolkit::Var v, double x,
                                    double y) {
    FdComparison out;
    const double base = v == tolkit::Var::x ? x : y;
    const double h = 1e-5 * std::max(1.0, std::fabs(base));
    auto at = [&](double delta, double& val) {
        return v == tolkit::Var::x ? e.try_eval(x + delta, y, val) : e.try_eval(x, y + delta, val);
    };
    double p1, m1, p2, m2;
    if (!at(h, p1) || !at(-h, m1) || !at(2 * h, p2) || !at(-2 * h, m2)) return out;
    if (!de.try_eval(x, y, out.symbolic)) return out;
    const double d1 = (p1 - m1) / (2 * h);
    const double d2 = (p2 - m2) / (4 * h);
    if (!std::isfinite(d1) || !std::isfinite(d2)) return out;
    if (std::fabs(d1 - d2) > 1e-6 * std::max(1.0, std::fabs(d1))) return out;
    // Richardson extrapolation removes the h^2 term.
    out.numeric = (4 * d1 - d2) / 3;
    out.rel_error = std::fabs(out.symbolic - out.numeric) / std::max(1.0, std::fabs(out.symbolic));
    out.usable = true;
    return out;
}

}  // namespace tolkit_test
