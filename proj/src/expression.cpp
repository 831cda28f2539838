#include "nullflow/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace nullflow {
namespace {

bool is_integral_value(double v) {
    return std::isfinite(v) && std::nearbyint(v) == v && std::fabs(v) <= 9.007199254740992e15;
}

const char* var_name(Var v) {
    switch (v) {
        case Var::U: return "u";
        case Var::T: return "t";
        case Var::S: return "s";
    }
    return "?";
}

const char* func_name(UnaryOp op) {
    switch (op) {
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Sinh: return "sinh";
        case UnaryOp::Cosh: return "cosh";
        case UnaryOp::Sqrt: return "sqrt";
        case UnaryOp::Neg: return "-";
    }
    return "?";
}

}  // namespace

ExprPtr Expr::constant(double value) {
    if (!std::isfinite(value)) throw Error("expression constant must be finite");
    if (value < 0.0) return unary(UnaryOp::Neg, constant(-value));
    std::shared_ptr<Expr> node(new Expr());
    node->kind_ = Kind::Constant;
    node->value_ = value == 0.0 ? 0.0 : value;  // normalize -0.0
    return node;
}

ExprPtr Expr::variable(Var v) {
    std::shared_ptr<Expr> node(new Expr());
    node->kind_ = Kind::Variable;
    node->var_ = v;
    return node;
}

ExprPtr Expr::unary(UnaryOp op, ExprPtr operand) {
    if (!operand) throw Error("unary expression needs an operand");
    std::shared_ptr<Expr> node(new Expr());
    node->kind_ = Kind::Unary;
    node->unary_ = op;
    node->lhs_ = std::move(operand);
    return node;
}

ExprPtr Expr::binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
    if (!lhs || !rhs) throw Error("binary expression needs two operands");
    if (op == BinaryOp::Pow && !pow_exponent(rhs))
        throw Error("power exponent must be an integral constant");
    std::shared_ptr<Expr> node(new Expr());
    node->kind_ = Kind::Binary;
    node->binary_ = op;
    node->lhs_ = std::move(lhs);
    node->rhs_ = std::move(rhs);
    return node;
}

std::optional<long long> pow_exponent(const ExprPtr& e) {
    if (!e) return std::nullopt;
    if (e->kind() == Expr::Kind::Constant && is_integral_value(e->value()))
        return static_cast<long long>(e->value());
    if (e->kind() == Expr::Kind::Unary && e->unary_op() == UnaryOp::Neg) {
        const auto& inner = e->operand();
        if (inner->kind() == Expr::Kind::Constant && is_integral_value(inner->value()))
            return -static_cast<long long>(inner->value());
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ExprPtr run() {
        ExprPtr e = expr();
        skip_ws();
        if (!eof())
            throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    }
    bool accept(char c) {
        skip_ws();
        if (!eof() && peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprPtr expr() {
        ExprPtr lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = Expr::binary(BinaryOp::Add, lhs, term());
            else if (accept('-'))
                lhs = Expr::binary(BinaryOp::Sub, lhs, term());
            else
                return lhs;
        }
    }

    ExprPtr term() {
        ExprPtr lhs = factor();
        for (;;) {
            if (accept('*'))
                lhs = Expr::binary(BinaryOp::Mul, lhs, factor());
            else if (accept('/'))
                lhs = Expr::binary(BinaryOp::Div, lhs, factor());
            else
                return lhs;
        }
    }

    ExprPtr factor() {
        if (accept('-')) return Expr::unary(UnaryOp::Neg, factor());
        return power();
    }

    ExprPtr power() {
        ExprPtr base = atom();
        if (!accept('^')) return base;
        return Expr::binary(BinaryOp::Pow, base, exponent());
    }

    ExprPtr exponent() {
        const bool neg = accept('-');
        skip_ws();
        const std::size_t start = pos_;
        if (eof() || !std::isdigit(static_cast<unsigned char>(peek())))
            throw ParseError("expected integer exponent", pos_);
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (!eof() && (peek() == '.' || peek() == 'e' || peek() == 'E'))
            throw ParseError("exponent must be an integer", pos_);
        long long value = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc{} || ptr != text_.data() + pos_)
            throw ParseError("malformed exponent", start);
        ExprPtr node = Expr::constant(static_cast<double>(value));
        if (neg) node = Expr::unary(UnaryOp::Neg, node);
        return node;
    }

    ExprPtr atom() {
        skip_ws();
        if (eof()) throw ParseError("unexpected end of input", pos_);
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c))) return Expr::constant(number());
        if (c == '(') {
            ++pos_;
            ExprPtr e = expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    double number() {
        const std::size_t start = pos_;
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (!eof() && peek() == '.') {
            ++pos_;
            while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
        if (!eof() && (peek() == 'e' || peek() == 'E')) {
            std::size_t probe = pos_ + 1;
            if (probe < text_.size() && (text_[probe] == '+' || text_[probe] == '-')) ++probe;
            if (probe < text_.size() && std::isdigit(static_cast<unsigned char>(text_[probe]))) {
                pos_ = probe;
                while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            }
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc{} || ptr != text_.data() + pos_)
            throw ParseError("malformed number", start);
        return value;
    }

    ExprPtr identifier() {
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "u") return Expr::variable(Var::U);
        if (name == "t") return Expr::variable(Var::T);
        if (name == "s") return Expr::variable(Var::S);
        UnaryOp op;
        if (name == "sin")
            op = UnaryOp::Sin;
        else if (name == "cos")
            op = UnaryOp::Cos;
        else if (name == "exp")
            op = UnaryOp::Exp;
        else if (name == "sinh")
            op = UnaryOp::Sinh;
        else if (name == "cosh")
            op = UnaryOp::Cosh;
        else if (name == "sqrt")
            op = UnaryOp::Sqrt;
        else
            throw ParseError("unknown identifier '" + std::string(name) + "'", start);
        if (!accept('(')) throw ParseError("expected '(' after function name", pos_);
        ExprPtr arg = expr();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        return Expr::unary(op, arg);
    }
};

}  // namespace

ExprPtr parse_expression(std::string_view text) { return Parser(text).run(); }

// ---------------------------------------------------------------------------
// Printer

namespace {

// Precedence levels: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, atoms 5.
int precedence(const Expr& e) {
    switch (e.kind()) {
        case Expr::Kind::Constant:
        case Expr::Kind::Variable: return 5;
        case Expr::Kind::Unary: return e.unary_op() == UnaryOp::Neg ? 3 : 5;
        case Expr::Kind::Binary:
            switch (e.binary_op()) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
            }
    }
    return 5;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string print(const ExprPtr& e, int required) {
    const int p = precedence(*e);
    std::string out;
    switch (e->kind()) {
        case Expr::Kind::Constant: out = format_double(e->value()); break;
        case Expr::Kind::Variable: out = var_name(e->var()); break;
        case Expr::Kind::Unary:
            if (e->unary_op() == UnaryOp::Neg)
                out = "-" + print(e->operand(), 3);
            else
                out = std::string(func_name(e->unary_op())) + "(" + print(e->operand(), 1) + ")";
            break;
        case Expr::Kind::Binary: {
            const char* op = nullptr;
            switch (e->binary_op()) {
                case BinaryOp::Add: op = " + "; break;
                case BinaryOp::Sub: op = " - "; break;
                case BinaryOp::Mul: op = " * "; break;
                case BinaryOp::Div: op = " / "; break;
                case BinaryOp::Pow: op = "^"; break;
            }
            if (e->binary_op() == BinaryOp::Pow) {
                out = print(e->lhs(), 5) + "^" + std::to_string(*pow_exponent(e->rhs()));
            } else {
                out = print(e->lhs(), p) + op + print(e->rhs(), p + 1);
            }
            break;
        }
    }
    if (p < required) return "(" + out + ")";
    return out;
}

}  // namespace

std::string to_string(const ExprPtr& e) {
    if (!e) throw Error("cannot print a null expression");
    return print(e, 1);
}

// ---------------------------------------------------------------------------
// Evaluation

double eval(const ExprPtr& e, const Bindings& b) {
    if (!e) throw EvalError("cannot evaluate a null expression");
    double out = 0.0;
    switch (e->kind()) {
        case Expr::Kind::Constant: out = e->value(); break;
        case Expr::Kind::Variable: {
            const auto bound = b.get(e->var());
            if (!bound) throw EvalError(std::string("unbound variable '") + var_name(e->var()) + "'");
            out = *bound;
            break;
        }
        case Expr::Kind::Unary: {
            const double x = eval(e->operand(), b);
            switch (e->unary_op()) {
                case UnaryOp::Neg: out = -x; break;
                case UnaryOp::Sin: out = std::sin(x); break;
                case UnaryOp::Cos: out = std::cos(x); break;
                case UnaryOp::Exp: out = std::exp(x); break;
                case UnaryOp::Sinh: out = std::sinh(x); break;
                case UnaryOp::Cosh: out = std::cosh(x); break;
                case UnaryOp::Sqrt: out = std::sqrt(x); break;
            }
            break;
        }
        case Expr::Kind::Binary: {
            const double lhs = eval(e->lhs(), b);
            switch (e->binary_op()) {
                case BinaryOp::Add: out = lhs + eval(e->rhs(), b); break;
                case BinaryOp::Sub: out = lhs - eval(e->rhs(), b); break;
                case BinaryOp::Mul: out = lhs * eval(e->rhs(), b); break;
                case BinaryOp::Div: {
                    const double rhs = eval(e->rhs(), b);
                    if (rhs == 0.0) throw EvalError("division by zero");
                    out = lhs / rhs;
                    break;
                }
                case BinaryOp::Pow:
                    out = std::pow(lhs, static_cast<double>(*pow_exponent(e->rhs())));
                    break;
            }
            break;
        }
    }
    if (!std::isfinite(out)) throw EvalError("non-finite result");
    return out;
}

// ---------------------------------------------------------------------------
// Differentiation

ExprPtr differentiate(const ExprPtr& e, Var v) {
    if (!e) throw Error("cannot differentiate a null expression");
    using K = Expr::Kind;
    switch (e->kind()) {
        case K::Constant: return Expr::constant(0.0);
        case K::Variable: return Expr::constant(e->var() == v ? 1.0 : 0.0);
        case K::Unary: {
            const ExprPtr& f = e->operand();
            ExprPtr df = differentiate(f, v);
            switch (e->unary_op()) {
                case UnaryOp::Neg: return Expr::unary(UnaryOp::Neg, df);
                case UnaryOp::Sin:
                    return Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Cos, f), df);
                case UnaryOp::Cos:
                    return Expr::binary(
                        BinaryOp::Mul,
                        Expr::unary(UnaryOp::Neg, Expr::unary(UnaryOp::Sin, f)), df);
                case UnaryOp::Exp:
                    return Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Exp, f), df);
                case UnaryOp::Sinh:
                    return Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Cosh, f), df);
                case UnaryOp::Cosh:
                    return Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Sinh, f), df);
                case UnaryOp::Sqrt:
                    return Expr::binary(
                        BinaryOp::Div, df,
                        Expr::binary(BinaryOp::Mul, Expr::constant(2.0),
                                     Expr::unary(UnaryOp::Sqrt, f)));
            }
            throw Error("unhandled unary operator");
        }
        case K::Binary: {
            const ExprPtr& f = e->lhs();
            const ExprPtr& g = e->rhs();
            switch (e->binary_op()) {
                case BinaryOp::Add:
                    return Expr::binary(BinaryOp::Add, differentiate(f, v), differentiate(g, v));
                case BinaryOp::Sub:
                    return Expr::binary(BinaryOp::Sub, differentiate(f, v), differentiate(g, v));
                case BinaryOp::Mul:
                    return Expr::binary(
                        BinaryOp::Add,
                        Expr::binary(BinaryOp::Mul, differentiate(f, v), g),
                        Expr::binary(BinaryOp::Mul, f, differentiate(g, v)));
                case BinaryOp::Div:
                    return Expr::binary(
                        BinaryOp::Div,
                        Expr::binary(BinaryOp::Sub,
                                     Expr::binary(BinaryOp::Mul, differentiate(f, v), g),
                                     Expr::binary(BinaryOp::Mul, f, differentiate(g, v))),
                        Expr::binary(BinaryOp::Pow, g, Expr::constant(2.0)));
                case BinaryOp::Pow: {
                    const long long n = *pow_exponent(g);
                    if (n == 0) return Expr::constant(0.0);
                    return Expr::binary(
                        BinaryOp::Mul, Expr::constant(static_cast<double>(n)),
                        Expr::binary(
                            BinaryOp::Mul,
                            Expr::binary(BinaryOp::Pow, f,
                                         Expr::constant(static_cast<double>(n - 1))),
                            differentiate(f, v)));
                }
            }
            throw Error("unhandled binary operator");
        }
    }
    throw Error("unhandled expression kind");
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind() != b->kind()) return false;
    switch (a->kind()) {
        case Expr::Kind::Constant: return a->value() == b->value();
        case Expr::Kind::Variable: return a->var() == b->var();
        case Expr::Kind::Unary:
            return a->unary_op() == b->unary_op() && structurally_equal(a->operand(), b->operand());
        case Expr::Kind::Binary:
            return a->binary_op() == b->binary_op() && structurally_equal(a->lhs(), b->lhs()) &&
                   structurally_equal(a->rhs(), b->rhs());
    }
    return false;
}

bool uses_variable(const ExprPtr& e, Var v) {
    if (!e) return false;
    switch (e->kind()) {
        case Expr::Kind::Constant: return false;
        case Expr::Kind::Variable: return e->var() == v;
        case Expr::Kind::Unary: return uses_variable(e->operand(), v);
        case Expr::Kind::Binary:
            return uses_variable(e->lhs(), v) || uses_variable(e->rhs(), v);
    }
    return false;
}

}  // namespace nullflow
