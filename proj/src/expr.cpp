#include "tolkit/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace tolkit {

namespace {

constexpr int kMaxIntegerExponent = 64;

NodePtr node_const(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = v;
    return n;
}

NodePtr node_var(Var v) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->var = v;
    return n;
}

NodePtr node_unary(Op op, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(a);
    return n;
}

NodePtr node_binary(Op op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

NodePtr node_func(Func f, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->op = Op::func;
    n->func = f;
    n->lhs = std::move(a);
    return n;
}

bool integer_exponent(const Node& n, int& k) {
    if (n.op != Op::constant) return false;
    const double v = n.value;
    if (v != std::floor(v) || std::fabs(v) > kMaxIntegerExponent) return false;
    k = static_cast<int>(v);
    return true;
}

double ipow(double base, int k) {
    unsigned m = static_cast<unsigned>(k < 0 ? -k : k);
    double result = 1.0;
    double b = base;
    while (m != 0) {
        if (m & 1u) result *= b;
        b *= b;
        m >>= 1u;
    }
    return result;
}

struct EvalState {
    double x;
    double y;
    const Node* bad = nullptr;
    const char* why = nullptr;
};

double fail(EvalState& s, const Node* n, const char* why) {
    if (s.bad == nullptr) {
        s.bad = n;
        s.why = why;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double eval_node(const Node* n, EvalState& s) {
    switch (n->op) {
        case Op::constant:
            return n->value;
        case Op::variable:
            return n->var == Var::x ? s.x : s.y;
        case Op::neg:
            return -eval_node(n->lhs.get(), s);
        case Op::add:
            return eval_node(n->lhs.get(), s) + eval_node(n->rhs.get(), s);
        case Op::sub:
            return eval_node(n->lhs.get(), s) - eval_node(n->rhs.get(), s);
        case Op::mul:
            return eval_node(n->lhs.get(), s) * eval_node(n->rhs.get(), s);
        case Op::div: {
            const double a = eval_node(n->lhs.get(), s);
            const double b = eval_node(n->rhs.get(), s);
            if (s.bad != nullptr) return std::numeric_limits<double>::quiet_NaN();
            if (b == 0.0) return fail(s, n, "division by zero");
            return a / b;
        }
        case Op::pow: {
            const double a = eval_node(n->lhs.get(), s);
            int k = 0;
            if (integer_exponent(*n->rhs, k)) {
                if (s.bad != nullptr) return std::numeric_limits<double>::quiet_NaN();
                if (k < 0) {
                    if (a == 0.0) return fail(s, n, "zero raised to a negative power");
                    return 1.0 / ipow(a, k);
                }
                return ipow(a, k);
            }
            const double b = eval_node(n->rhs.get(), s);
            if (s.bad != nullptr) return std::numeric_limits<double>::quiet_NaN();
            if (a < 0.0 && b != std::floor(b)) return fail(s, n, "negative base with non-integer exponent");
            if (a == 0.0 && b < 0.0) return fail(s, n, "zero raised to a negative power");
            return std::pow(a, b);
        }
        case Op::func: {
            const double a = eval_node(n->lhs.get(), s);
            if (s.bad != nullptr) return std::numeric_limits<double>::quiet_NaN();
            switch (n->func) {
                case Func::exp:
                    return std::exp(a);
                case Func::log:
                    if (a <= 0.0) return fail(s, n, "log of non-positive value");
                    return std::log(a);
                case Func::sqrt:
                    if (a < 0.0) return fail(s, n, "sqrt of negative value");
                    return std::sqrt(a);
                case Func::abs:
                    return std::fabs(a);
            }
        }
    }
    return fail(s, n, "malformed node");
}

// Precedence levels used for printing.
int precedence(const Node& n) {
    switch (n.op) {
        case Op::add:
        case Op::sub:
            return 1;
        case Op::mul:
        case Op::div:
            return 2;
        case Op::neg:
            return 3;
        case Op::pow:
            return 4;
        default:
            return 5;
    }
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_node(const Node& n, std::string& out);

void print_child(const Node& child, bool parens, std::string& out) {
    if (parens) out += '(';
    print_node(child, out);
    if (parens) out += ')';
}

void print_node(const Node& n, std::string& out) {
    switch (n.op) {
        case Op::constant:
            if (n.value < 0.0 || std::signbit(n.value)) {
                out += "(-";
                out += format_number(-n.value);
                out += ')';
            } else {
                out += format_number(n.value);
            }
            return;
        case Op::variable:
            out += n.var == Var::x ? 'x' : 'y';
            return;
        case Op::neg:
            out += '-';
            print_child(*n.lhs, precedence(*n.lhs) < 3, out);
            return;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div: {
            const int p = precedence(n);
            print_child(*n.lhs, precedence(*n.lhs) < p, out);
            out += n.op == Op::add ? " + " : n.op == Op::sub ? " - " : n.op == Op::mul ? "*" : "/";
            print_child(*n.rhs, precedence(*n.rhs) <= p, out);
            return;
        }
        case Op::pow:
            print_child(*n.lhs, precedence(*n.lhs) < 5, out);
            out += '^';
            print_child(*n.rhs, precedence(*n.rhs) < 4, out);
            return;
        case Op::func:
            out += func_name(n.func);
            out += '(';
            print_node(*n.lhs, out);
            out += ')';
            return;
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr run() {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw ParseError(ParseError::Kind::empty, pos_, {"expression"}, "", "empty expression");
        }
        NodePtr e = parse_sum();
        skip_ws();
        if (pos_ < text_.size()) {
            syntax_error({"+", "-", "*", "/", "^", "end of input"});
        }
        return Expr(std::move(e));
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int depth_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void syntax_error(std::vector<std::string> expected) {
        std::ostringstream msg;
        msg << "syntax error at offset " << pos_ << ": expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i != 0) msg << ", ";
            msg << "'" << expected[i] << "'";
        }
        if (pos_ < text_.size()) {
            msg << " but found '" << text_[pos_] << "'";
        } else {
            msg << " but reached end of input";
        }
        throw ParseError(ParseError::Kind::syntax, pos_, std::move(expected), "", msg.str());
    }

    NodePtr parse_sum() {
        NodePtr lhs = parse_product();
        while (true) {
            if (accept('+')) {
                lhs = node_binary(Op::add, lhs, parse_product());
            } else if (accept('-')) {
                lhs = node_binary(Op::sub, lhs, parse_product());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        while (true) {
            if (accept('*')) {
                lhs = node_binary(Op::mul, lhs, parse_unary());
            } else if (accept('/')) {
                lhs = node_binary(Op::div, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return node_unary(Op::neg, parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (accept('^')) {
            NodePtr exponent = parse_unary();
            return node_binary(Op::pow, base, exponent);
        }
        return base;
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) syntax_error({"number", "identifier", "(", "-"});
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        if (c == '(') {
            ++pos_;
            if (++depth_ > 512) syntax_error({"shallower nesting"});
            NodePtr inner = parse_sum();
            --depth_;
            if (!accept(')')) syntax_error({")", "+", "-", "*", "/", "^"});
            return inner;
        }
        syntax_error({"number", "identifier", "(", "-"});
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        if (pos_ == start + 1 && text_[start] == '.') {
            pos_ = start;
            syntax_error({"digit"});
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        double v = 0.0;
        const char* first = text_.data() + start;
        const char* last = text_.data() + pos_;
        auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last) {
            pos_ = start;
            syntax_error({"number"});
        }
        return node_const(v);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string id(text_.substr(start, pos_ - start));
        if (id == "x") return node_var(Var::x);
        if (id == "y") return node_var(Var::y);
        Func f;
        if (id == "exp") {
            f = Func::exp;
        } else if (id == "log" || id == "ln") {
            f = Func::log;
        } else if (id == "sqrt") {
            f = Func::sqrt;
        } else if (id == "abs") {
            f = Func::abs;
        } else {
            throw ParseError(ParseError::Kind::unknown_identifier, start, {"x", "y", "exp", "log", "sqrt", "abs"},
                             id, "unknown identifier '" + id + "' at offset " + std::to_string(start));
        }
        if (!accept('(')) syntax_error({"("});
        if (++depth_ > 512) syntax_error({"shallower nesting"});
        NodePtr arg = parse_sum();
        --depth_;
        if (!accept(')')) syntax_error({")", "+", "-", "*", "/", "^"});
        return node_func(f, arg);
    }
};

bool is_const(const Expr& e, double v) {
    return e.root().op == Op::constant && e.root().value == v;
}

bool both_const(const Expr& a, const Expr& b) {
    return a.root().op == Op::constant && b.root().op == Op::constant;
}

Expr fold_or(const NodePtr& n) {
    Expr e(n);
    if (n->lhs && n->lhs->op == Op::constant && (!n->rhs || n->rhs->op == Op::constant)) {
        EvalResult r = e.eval(0.0, 0.0);
        if (r.ok && std::isfinite(r.value)) return Expr::constant(r.value);
    }
    return e;
}

}  // namespace

ParseError::ParseError(Kind kind, std::size_t offset, std::vector<std::string> expected, std::string identifier,
                       const std::string& message)
    : std::runtime_error(message),
      kind_(kind),
      offset_(offset),
      expected_(std::move(expected)),
      identifier_(std::move(identifier)) {}

Expr::Expr() : root_(node_const(0.0)) {}

Expr::Expr(NodePtr root) : root_(std::move(root)) {}

Expr Expr::constant(double v) { return Expr(node_const(v)); }

Expr Expr::variable(Var v) { return Expr(node_var(v)); }

EvalResult Expr::eval(double x, double y) const {
    EvalState s{x, y};
    EvalResult r;
    r.value = eval_node(root_.get(), s);
    if (s.bad != nullptr) {
        r.ok = false;
        r.error = s.why;
        std::string sub;
        print_node(*s.bad, sub);
        r.subexpr = sub;
        r.value = std::numeric_limits<double>::quiet_NaN();
    } else if (!std::isfinite(r.value)) {
        r.ok = false;
        r.error = "non-finite result";
        r.subexpr = to_string();
    }
    return r;
}

bool Expr::try_eval(double x, double y, double& out) const noexcept {
    EvalState s{x, y};
    out = eval_node(root_.get(), s);
    return s.bad == nullptr && std::isfinite(out);
}

std::string Expr::to_string() const {
    std::string out;
    print_node(*root_, out);
    return out;
}

bool Expr::is_constant() const { return root_->op == Op::constant; }

bool Expr::is_zero() const { return is_const(*this, 0.0); }

Expr parse_expr(std::string_view text) { return Parser(text).run(); }

const char* func_name(Func f) {
    switch (f) {
        case Func::exp:
            return "exp";
        case Func::log:
            return "log";
        case Func::sqrt:
            return "sqrt";
        case Func::abs:
            return "abs";
    }
    return "?";
}

Expr make_neg(const Expr& a) {
    if (a.root().op == Op::constant) return Expr::constant(-a.root().value);
    if (a.root().op == Op::neg) return Expr(a.root().lhs);
    return Expr(node_unary(Op::neg, a.ptr()));
}

Expr make_add(const Expr& a, const Expr& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (both_const(a, b)) return fold_or(node_binary(Op::add, a.ptr(), b.ptr()));
    return Expr(node_binary(Op::add, a.ptr(), b.ptr()));
}

Expr make_sub(const Expr& a, const Expr& b) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return make_neg(b);
    if (both_const(a, b)) return fold_or(node_binary(Op::sub, a.ptr(), b.ptr()));
    return Expr(node_binary(Op::sub, a.ptr(), b.ptr()));
}

Expr make_mul(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(a, -1.0)) return make_neg(b);
    if (is_const(b, -1.0)) return make_neg(a);
    if (both_const(a, b)) return fold_or(node_binary(Op::mul, a.ptr(), b.ptr()));
    return Expr(node_binary(Op::mul, a.ptr(), b.ptr()));
}

Expr make_div(const Expr& a, const Expr& b) {
    if (is_const(b, 1.0)) return a;
    if (both_const(a, b) && b.root().value != 0.0) return fold_or(node_binary(Op::div, a.ptr(), b.ptr()));
    return Expr(node_binary(Op::div, a.ptr(), b.ptr()));
}

Expr make_pow(const Expr& a, const Expr& b) {
    if (is_const(b, 1.0)) return a;
    if (is_const(b, 0.0)) return Expr::constant(1.0);
    if (both_const(a, b)) return fold_or(node_binary(Op::pow, a.ptr(), b.ptr()));
    return Expr(node_binary(Op::pow, a.ptr(), b.ptr()));
}

Expr make_func(Func f, const Expr& a) {
    if (a.is_constant()) return fold_or(node_func(f, a.ptr()));
    return Expr(node_func(f, a.ptr()));
}

Expr differentiate(const Expr& e, Var v) {
    const Node& n = e.root();
    switch (n.op) {
        case Op::constant:
            return Expr::constant(0.0);
        case Op::variable:
            return Expr::constant(n.var == v ? 1.0 : 0.0);
        case Op::neg:
            return make_neg(differentiate(Expr(n.lhs), v));
        case Op::add:
            return make_add(differentiate(Expr(n.lhs), v), differentiate(Expr(n.rhs), v));
        case Op::sub:
            return make_sub(differentiate(Expr(n.lhs), v), differentiate(Expr(n.rhs), v));
        case Op::mul: {
            Expr a(n.lhs), b(n.rhs);
            return make_add(make_mul(differentiate(a, v), b), make_mul(a, differentiate(b, v)));
        }
        case Op::div: {
            Expr a(n.lhs), b(n.rhs);
            Expr da = differentiate(a, v);
            Expr db = differentiate(b, v);
            if (db.is_zero()) return make_div(da, b);
            return make_div(make_sub(make_mul(da, b), make_mul(a, db)), make_pow(b, Expr::constant(2.0)));
        }
        case Op::pow: {
            Expr a(n.lhs), b(n.rhs);
            Expr da = differentiate(a, v);
            Expr db = differentiate(b, v);
            if (db.is_zero()) {
                // d(a^b) = b * a^(b-1) * a'
                Expr reduced = make_pow(a, make_sub(b, Expr::constant(1.0)));
                return make_mul(make_mul(b, reduced), da);
            }
            // d(a^b) = a^b * (b' log a + b a'/a)
            Expr term = make_add(make_mul(db, make_func(Func::log, a)), make_div(make_mul(b, da), a));
            return make_mul(e, term);
        }
        case Op::func: {
            Expr a(n.lhs);
            Expr da = differentiate(a, v);
            if (da.is_zero()) return Expr::constant(0.0);
            switch (n.func) {
                case Func::exp:
                    return make_mul(e, da);
                case Func::log:
                    return make_div(da, a);
                case Func::sqrt:
                    return make_div(da, make_mul(Expr::constant(2.0), e));
                case Func::abs:
                    return make_mul(da, make_div(a, e));
            }
        }
    }
    return Expr::constant(0.0);
}

}  // namespace tolkit
