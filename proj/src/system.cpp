#include "tolkit/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace tolkit {

namespace {

constexpr double kTieTolerance = 1e-9;
constexpr double kZeroEigen = 1e-12;
constexpr double kResidualAccept = 1e-10;

struct BuiltinSpec {
    const char* name;
    const char* f;
    const char* g;
};

// Coefficients are kept as the decimal literals of the published systems.
constexpr BuiltinSpec kBuiltins[] = {
    {"ex2", "x^2/(1+y) - x", "x^2 - y/2"},
    {"ex1", "(0.5*x - y)*(0.1*x/(1+y) - 1)", "0.4*x - y"},
    {"ex3", "x*((1+y^2)/(1-y+y^2) - 1.9)", "x - y"},
};

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<double> parse_numbers(const std::string& text, std::size_t count, int line) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            out.push_back(v);
        } catch (const std::exception&) {
            throw DefinitionError(line, "not a number: '" + t + "'");
        }
    }
    if (out.size() != count) {
        throw DefinitionError(line, "expected " + std::to_string(count) + " comma-separated numbers");
    }
    return out;
}

double residual_norm(const PlanarSystem& sys, Vec2 p, bool& ok) {
    double f = 0.0, g = 0.0;
    ok = sys.field_fast(p.x, p.y, f, g);
    return ok ? std::hypot(f, g) : 0.0;
}

}  // namespace

Eigenvalues eigenvalues(const Mat2& m) {
    Eigenvalues e;
    const double half_tr = 0.5 * m.trace();
    const double half_diff = 0.5 * (m.a - m.d);
    const double disc = half_diff * half_diff + m.b * m.c;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        // Avoid cancellation: compute the larger-magnitude root first.
        const double big = half_tr >= 0.0 ? half_tr + s : half_tr - s;
        const double det = m.det();
        const double small = big != 0.0 ? det / big : half_tr - (big - half_tr);
        e.re1 = std::max(big, small);
        e.re2 = std::min(big, small);
        e.complex = false;
    } else {
        e.complex = true;
        e.re1 = half_tr;
        e.re2 = half_tr;
        e.im = std::sqrt(-disc);
    }
    return e;
}

const char* to_string(FixedPointClass c) {
    switch (c) {
        case FixedPointClass::stable_node:
            return "stable node";
        case FixedPointClass::saddle:
            return "saddle";
        case FixedPointClass::stable_spiral:
            return "stable spiral";
        case FixedPointClass::unstable_node:
            return "unstable node";
        case FixedPointClass::unstable_spiral:
            return "unstable spiral";
        case FixedPointClass::degenerate:
            return "degenerate";
    }
    return "degenerate";
}

FixedPointReport classify_point(Vec2 p, const Mat2& jac) {
    FixedPointReport r;
    r.location = p;
    r.eig = eigenvalues(jac);
    const Eigenvalues& e = r.eig;
    if (e.complex) {
        if (e.re1 < 0.0) {
            r.classification = FixedPointClass::stable_spiral;
        } else if (e.re1 > 0.0) {
            r.classification = FixedPointClass::unstable_spiral;
        } else {
            r.classification = FixedPointClass::degenerate;
        }
        r.satisfies_A1 = false;
        return r;
    }
    const double scale = std::max({std::fabs(e.re1), std::fabs(e.re2), 1.0});
    r.satisfies_A1 = e.re1 < 0.0 && e.re2 < 0.0;
    if (std::fabs(e.re1) < kZeroEigen * scale || std::fabs(e.re2) < kZeroEigen * scale ||
        std::fabs(e.re1 - e.re2) < kTieTolerance) {
        r.classification = FixedPointClass::degenerate;
    } else if (e.re1 < 0.0) {
        r.classification = FixedPointClass::stable_node;
    } else if (e.re2 > 0.0) {
        r.classification = FixedPointClass::unstable_node;
    } else {
        r.classification = FixedPointClass::saddle;
    }
    return r;
}

PlanarSystem PlanarSystem::from_expressions(std::string name, const Expr& f, const Expr& g) {
    PlanarSystem s;
    s.kind_ = Kind::expression;
    s.name_ = std::move(name);
    s.f_ = f;
    s.g_ = g;
    s.fx_ = differentiate(f, Var::x);
    s.fy_ = differentiate(f, Var::y);
    s.gx_ = differentiate(g, Var::x);
    s.gy_ = differentiate(g, Var::y);
    return s;
}

PlanarSystem PlanarSystem::from_matrix(std::string name, const Mat2& a) {
    PlanarSystem s;
    s.kind_ = Kind::linear;
    s.name_ = std::move(name);
    s.a_ = a;
    const Expr x = Expr::variable(Var::x);
    const Expr y = Expr::variable(Var::y);
    s.f_ = make_add(make_mul(Expr::constant(a.a), x), make_mul(Expr::constant(a.b), y));
    s.g_ = make_add(make_mul(Expr::constant(a.c), x), make_mul(Expr::constant(a.d), y));
    s.fx_ = Expr::constant(a.a);
    s.fy_ = Expr::constant(a.b);
    s.gx_ = Expr::constant(a.c);
    s.gy_ = Expr::constant(a.d);
    return s;
}

FieldValue PlanarSystem::field(Vec2 p) const {
    FieldValue out;
    if (kind_ == Kind::linear) {
        out.value = a_.apply(p);
        return out;
    }
    const EvalResult rf = f_.eval(p.x, p.y);
    if (!rf.ok) {
        out.ok = false;
        out.error = "f: " + rf.error + " in " + rf.subexpr;
        return out;
    }
    const EvalResult rg = g_.eval(p.x, p.y);
    if (!rg.ok) {
        out.ok = false;
        out.error = "g: " + rg.error + " in " + rg.subexpr;
        return out;
    }
    out.value = {rf.value, rg.value};
    return out;
}

bool PlanarSystem::field_fast(double x, double y, double& fx, double& gy) const noexcept {
    if (kind_ == Kind::linear) {
        fx = a_.a * x + a_.b * y;
        gy = a_.c * x + a_.d * y;
        return true;
    }
    return f_.try_eval(x, y, fx) && g_.try_eval(x, y, gy);
}

bool PlanarSystem::f_fast(double x, double y, double& out) const noexcept {
    if (kind_ == Kind::linear) {
        out = a_.a * x + a_.b * y;
        return true;
    }
    return f_.try_eval(x, y, out);
}

bool PlanarSystem::fy_fast(double x, double y, double& out) const noexcept {
    if (kind_ == Kind::linear) {
        out = a_.b;
        return true;
    }
    return fy_.try_eval(x, y, out);
}

JacobianValue PlanarSystem::jacobian(Vec2 p) const {
    JacobianValue out;
    if (kind_ == Kind::linear) {
        out.value = a_;
        return out;
    }
    const Expr* parts[4] = {&fx_, &fy_, &gx_, &gy_};
    const char* names[4] = {"f_x", "f_y", "g_x", "g_y"};
    double vals[4];
    for (int i = 0; i < 4; ++i) {
        const EvalResult r = parts[i]->eval(p.x, p.y);
        if (!r.ok) {
            out.ok = false;
            out.error = std::string(names[i]) + ": " + r.error + " in " + r.subexpr;
            return out;
        }
        vals[i] = r.value;
    }
    out.value = {vals[0], vals[1], vals[2], vals[3]};
    return out;
}

PlanarSystem builtin(std::string_view name) {
    for (const auto& spec : kBuiltins) {
        if (name == spec.name) {
            PlanarSystem s = PlanarSystem::from_expressions(spec.name, parse_expr(spec.f), parse_expr(spec.g));
            s.builtin_ = true;
            return s;
        }
    }
    std::string msg = "unknown builtin '" + std::string(name) + "'; available:";
    for (const auto& spec : kBuiltins) msg += std::string(" ") + spec.name;
    throw std::invalid_argument(msg);
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> out;
    for (const auto& spec : kBuiltins) out.emplace_back(spec.name);
    return out;
}

PlanarSystem parse_system_definition(std::string_view text) {
    std::map<std::string, std::pair<std::string, int>> kv;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t hash = raw.find('#');
        const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (content.empty()) continue;
        const std::size_t eq = content.find('=');
        if (eq == std::string::npos) throw DefinitionError(line, "expected key=value");
        const std::string key = trim(content.substr(0, eq));
        const std::string value = trim(content.substr(eq + 1));
        if (key != "name" && key != "f" && key != "g" && key != "A" && key != "node") {
            throw DefinitionError(line, "unknown key '" + key + "' (allowed: name, f, g, A, node)");
        }
        if (kv.count(key) != 0) throw DefinitionError(line, "duplicate key '" + key + "'");
        if (value.empty()) throw DefinitionError(line, "empty value for '" + key + "'");
        kv[key] = {value, line};
    }
    const int end_line = line + 1;
    const std::string name = kv.count("name") ? kv["name"].first : std::string("custom");
    const bool has_matrix = kv.count("A") != 0;
    const bool has_f = kv.count("f") != 0;
    const bool has_g = kv.count("g") != 0;
    PlanarSystem sys;
    if (has_matrix) {
        if (has_f || has_g) {
            throw DefinitionError(kv["A"].second, "give either A or f and g, not both");
        }
        const auto v = parse_numbers(kv["A"].first, 4, kv["A"].second);
        sys = PlanarSystem::from_matrix(name, Mat2{v[0], v[1], v[2], v[3]});
    } else {
        if (!has_f) throw DefinitionError(end_line, "missing key 'f'");
        if (!has_g) throw DefinitionError(end_line, "missing key 'g'");
        Expr f, g;
        try {
            f = parse_expr(kv["f"].first);
        } catch (const ParseError& e) {
            throw DefinitionError(kv["f"].second, std::string("f: ") + e.what());
        }
        try {
            g = parse_expr(kv["g"].first);
        } catch (const ParseError& e) {
            throw DefinitionError(kv["g"].second, std::string("g: ") + e.what());
        }
        sys = PlanarSystem::from_expressions(name, f, g);
    }
    if (kv.count("node") != 0) {
        const auto v = parse_numbers(kv["node"].first, 2, kv["node"].second);
        sys.set_node({v[0], v[1]});
    }
    return sys;
}

PlanarSystem load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open system file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system_definition(ss.str());
}

JacobianValue jacobian_at(const PlanarSystem& sys, Vec2 p) { return sys.jacobian(p); }

double isocline_value(const PlanarSystem& sys, Vec2 p) {
    if (sys.kind() == PlanarSystem::Kind::linear) return sys.matrix().a * p.x + sys.matrix().b * p.y;
    const EvalResult r = sys.f().eval(p.x, p.y);
    if (!r.ok) throw DomainError("isocline value: " + r.error + " in " + r.subexpr);
    return r.value;
}

std::vector<FixedPointReport> find_fixed_points(const PlanarSystem& sys, const FixedPointSearch& search) {
    std::vector<FixedPointReport> found;
    const int n = std::max(search.grid, 2);
    const Box& box = search.box;
    const double span = std::max({box.xmax - box.xmin, box.ymax - box.ymin, 1.0});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            Vec2 p{box.xmin + (box.xmax - box.xmin) * i / (n - 1), box.ymin + (box.ymax - box.ymin) * j / (n - 1)};
            bool ok = false;
            double res = residual_norm(sys, p, ok);
            if (!ok) continue;
            for (int it = 0; it < search.max_iterations && res > 1e-14; ++it) {
                const JacobianValue jv = sys.jacobian(p);
                if (!jv.ok) {
                    ok = false;
                    break;
                }
                const Mat2& J = jv.value;
                const double det = J.det();
                if (det == 0.0 || !std::isfinite(det)) {
                    ok = false;
                    break;
                }
                double f = 0.0, g = 0.0;
                (void)sys.field_fast(p.x, p.y, f, g);
                const Vec2 step{-(J.d * f - J.b * g) / det, -(-J.c * f + J.a * g) / det};
                double lambda = 1.0;
                Vec2 trial = p + step;
                bool trial_ok = false;
                double trial_res = residual_norm(sys, trial, trial_ok);
                int halvings = 0;
                while ((!trial_ok || trial_res > res) && halvings < 30) {
                    lambda *= 0.5;
                    trial = p + lambda * step;
                    trial_res = residual_norm(sys, trial, trial_ok);
                    ++halvings;
                }
                if (!trial_ok) {
                    ok = false;
                    break;
                }
                const double moved = norm(trial - p);
                p = trial;
                res = trial_res;
                if (moved <= 1e-15 * std::max(1.0, norm(p))) break;
            }
            if (!ok || !(res <= kResidualAccept) || !std::isfinite(p.x) || !std::isfinite(p.y)) continue;
            const double slack = 1e-9 * span;
            if (p.x < box.xmin - slack || p.x > box.xmax + slack || p.y < box.ymin - slack || p.y > box.ymax + slack) {
                continue;
            }
            bool duplicate = false;
            for (auto& existing : found) {
                if (distance(existing.location, p) < search.dedupe) {
                    duplicate = true;
                    if (res < existing.residual) {
                        existing.location = p;
                        existing.residual = res;
                    }
                    break;
                }
            }
            if (duplicate) continue;
            FixedPointReport rep;
            rep.location = p;
            rep.residual = res;
            found.push_back(rep);
        }
    }
    for (auto& rep : found) {
        const JacobianValue jv = sys.jacobian(rep.location);
        const double residual = rep.residual;
        rep = classify_point(rep.location, jv.ok ? jv.value : Mat2{});
        rep.residual = residual;
    }
    std::sort(found.begin(), found.end(), [](const FixedPointReport& a, const FixedPointReport& b) {
        if (a.location.x != b.location.x) return a.location.x < b.location.x;
        return a.location.y < b.location.y;
    });
    return found;
}

FixedPointReport node_report(const PlanarSystem& sys) {
    const Vec2 n = sys.node();
    const JacobianValue jv = sys.jacobian(n);
    if (!jv.ok) throw DomainError("jacobian at node: " + jv.error);
    FixedPointReport rep = classify_point(n, jv.value);
    bool ok = false;
    rep.residual = residual_norm(sys, n, ok);
    if (!ok) rep.residual = std::numeric_limits<double>::infinity();
    return rep;
}

}  // namespace tolkit
