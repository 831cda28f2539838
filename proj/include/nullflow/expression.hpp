#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "nullflow/errors.hpp"

namespace nullflow {

enum class Var { U, T, S };
enum class UnaryOp { Neg, Sin, Cos, Exp, Sinh, Cosh, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree over variables u (parameter), t (time),
/// s (arclength). Two structural invariants keep printing round-trippable:
/// constants are non-negative (negative values are Neg-wrapped by the
/// factory) and Pow exponents are integral constants, optionally Neg-wrapped.
class Expr {
public:
    enum class Kind { Constant, Variable, Unary, Binary };

    static ExprPtr constant(double value);
    static ExprPtr variable(Var v);
    static ExprPtr unary(UnaryOp op, ExprPtr operand);
    static ExprPtr binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);

    Kind kind() const noexcept { return kind_; }
    double value() const noexcept { return value_; }
    Var var() const noexcept { return var_; }
    UnaryOp unary_op() const noexcept { return unary_; }
    BinaryOp binary_op() const noexcept { return binary_; }
    const ExprPtr& lhs() const noexcept { return lhs_; }
    const ExprPtr& rhs() const noexcept { return rhs_; }
    const ExprPtr& operand() const noexcept { return lhs_; }

private:
    Expr() = default;

    Kind kind_ = Kind::Constant;
    double value_ = 0.0;
    Var var_ = Var::U;
    UnaryOp unary_ = UnaryOp::Neg;
    BinaryOp binary_ = BinaryOp::Add;
    ExprPtr lhs_;
    ExprPtr rhs_;
};

struct Bindings {
    std::optional<double> u;
    std::optional<double> t;
    std::optional<double> s;

    std::optional<double> get(Var v) const {
        switch (v) {
            case Var::U: return u;
            case Var::T: return t;
            case Var::S: return s;
        }
        return std::nullopt;
    }
};

/// Grammar (whitespace-insensitive):
///   expr     := term (('+'|'-') term)*
///   term     := factor (('*'|'/') factor)*
///   factor   := '-' factor | power
///   power    := atom ['^' exponent]
///   exponent := ['-'] digits
///   atom     := number | 'u' | 't' | 's' | func '(' expr ')' | '(' expr ')'
///   func     := sin | cos | exp | sinh | cosh | sqrt
/// Numbers start with a digit; exponents must be integers.
ExprPtr parse_expression(std::string_view text);

std::string to_string(const ExprPtr& e);

double eval(const ExprPtr& e, const Bindings& b);

/// Derivative with respect to v, built from the same factories (unsimplified
/// apart from trivial Pow cases).
ExprPtr differentiate(const ExprPtr& e, Var v);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

/// True when the expression tree references variable v anywhere.
bool uses_variable(const ExprPtr& e, Var v);

/// If e is an integral-constant exponent node (Constant or Neg(Constant)),
/// return its value.
std::optional<long long> pow_exponent(const ExprPtr& e);

}  // namespace nullflow
