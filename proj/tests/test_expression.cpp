#include <doctest.h>

#include <nullflow/errors.hpp>
#include <nullflow/expression.hpp>

#include <cmath>

#include "support/helpers.hpp"

using namespace nullflow;

namespace {
double eval_u(const char* text, double u) {
    Bindings b;
    b.u = u;
    return eval(parse_expression(text), b);
}
}  // namespace

TEST_SUITE_BEGIN("expression");

TEST_CASE("parse and evaluate") {
    CHECK(eval_u("2 + 3*u", 1.0) == doctest::Approx(5.0));
    CHECK(eval_u("2*u^2", 3.0) == doctest::Approx(18.0));
    CHECK(eval_u("-u^2", 2.0) == doctest::Approx(-4.0));
    CHECK(eval_u("u^-2", 2.0) == doctest::Approx(0.25));
    CHECK(eval_u("1 + 2*3^2", 0.0) == doctest::Approx(19.0));
    CHECK(eval_u("2/4/2", 0.0) == doctest::Approx(0.25));
    CHECK(eval_u("u - -u", 3.0) == doctest::Approx(6.0));
    CHECK(eval_u("sqrt(u)", 4.0) == doctest::Approx(2.0));
    CHECK(eval_u("sinh(0)", 1.0) == doctest::Approx(0.0));
    CHECK(eval_u("cosh(0) + exp(0)", 1.0) == doctest::Approx(2.0));
    CHECK(eval_u("(1 + u)*(2 - u)", 0.5) == doctest::Approx(1.5 * 1.5));

    Bindings b;
    b.u = 0.3;
    b.t = 0.7;
    b.s = 2.0;
    CHECK(eval(parse_expression("sin(u)*cos(t) + s"), b) ==
          doctest::Approx(std::sin(0.3) * std::cos(0.7) + 2.0));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse_expression(""), ParseError);
    CHECK_THROWS_AS(parse_expression("2 +"), ParseError);
    CHECK_THROWS_AS(parse_expression("(u"), ParseError);
    CHECK_THROWS_AS(parse_expression("foo(u)"), ParseError);
    CHECK_THROWS_AS(parse_expression("u^1.5"), ParseError);
    CHECK_THROWS_AS(parse_expression("u^t"), ParseError);
    CHECK_THROWS_AS(parse_expression("u u"), ParseError);
    CHECK_THROWS_AS(parse_expression(".5"), ParseError);
}

TEST_CASE("parse error carries an offset") {
    try {
        parse_expression("1 + &");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
}

TEST_CASE("eval errors") {
    Bindings only_t;
    only_t.t = 1.0;
    CHECK_THROWS_AS(eval(parse_expression("u + 1"), only_t), EvalError);

    Bindings b;
    b.u = 1.0;
    CHECK_THROWS_AS(eval(parse_expression("1/(u - u)"), b), EvalError);
    CHECK_THROWS_AS(eval(parse_expression("sqrt(0 - u)"), b), EvalError);
}

TEST_CASE("symbolic derivative matches analytic forms") {
    const ExprPtr e = parse_expression("u^3 + sin(2*u)");
    const ExprPtr d = differentiate(e, Var::U);
    Bindings b;
    b.u = 0.7;
    CHECK(eval(d, b) == doctest::Approx(3 * 0.7 * 0.7 + 2 * std::cos(1.4)).epsilon(1e-14));

    const ExprPtr mixed = parse_expression("u^2*t + cosh(t)");
    Bindings bt;
    bt.u = 0.4;
    bt.t = 0.9;
    CHECK(eval(differentiate(mixed, Var::T), bt) ==
          doctest::Approx(0.16 + std::sinh(0.9)).epsilon(1e-14));
    CHECK(eval(differentiate(mixed, Var::S), bt) == 0.0);
}

TEST_CASE("uses_variable and pow_exponent") {
    const ExprPtr e = parse_expression("sin(u) + t^2");
    CHECK(uses_variable(e, Var::U));
    CHECK(uses_variable(e, Var::T));
    CHECK_FALSE(uses_variable(e, Var::S));

    const ExprPtr p = parse_expression("u^-3");
    REQUIRE(p->kind() == Expr::Kind::Binary);
    REQUIRE(p->binary_op() == BinaryOp::Pow);
    REQUIRE(pow_exponent(p->rhs()).has_value());
    CHECK(*pow_exponent(p->rhs()) == -3);
    CHECK_FALSE(pow_exponent(parse_expression("u")).has_value());
}

TEST_CASE("negative constants are Neg-wrapped by the factory") {
    const ExprPtr c = Expr::constant(-1.5);
    REQUIRE(c->kind() == Expr::Kind::Unary);
    CHECK(c->unary_op() == UnaryOp::Neg);
    CHECK(c->operand()->value() == 1.5);
}

TEST_CASE("print/parse round trip on random expressions") {
    testsup::Rng rng(0xC0FFEE);
    for (int it = 0; it < 300; ++it) {
        const ExprPtr e = testsup::random_expr(rng, 4);
        const std::string text = to_string(e);
        ExprPtr back;
        REQUIRE_NOTHROW(back = parse_expression(text));
        CHECK_MESSAGE(structurally_equal(e, back), text);
    }
}

TEST_CASE("derivative agrees with a five-point stencil") {
    testsup::Rng rng(42);
    std::vector<Bindings> probes;
    for (double u : {0.3, 0.7, 1.1}) {
        Bindings b;
        b.u = u;
        b.t = 0.4;
        probes.push_back(b);
    }
    const double h = 1e-3;
    int checked = 0;
    for (int it = 0; it < 4000 && checked < 200; ++it) {
        const ExprPtr e = testsup::random_expr(rng, 3);
        if (!testsup::tame_at(e, probes, h)) continue;
        const ExprPtr d = differentiate(e, Var::U);
        bool used = false;
        for (const Bindings& b : probes) {
            double fd = 0.0;
            if (!testsup::fd_converged(e, b, h, &fd)) continue;
            const double sym = eval(d, b);
            CHECK_MESSAGE(std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(sym)),
                          to_string(e));
            used = true;
        }
        if (used) ++checked;
    }
    CHECK(checked == 200);
}

TEST_SUITE_END();
