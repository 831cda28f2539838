#pragma once

#include <nullflow/expression.hpp>
#include <nullflow/flow.hpp>
#include <nullflow/frames.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testsup {

using nullflow::Bindings;
using nullflow::Expr;
using nullflow::ExprPtr;

using Rng = std::mt19937_64;

inline double rand_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random expression over u and t with integer exponents, for round-trip and
// derivative spot checks. Depth-limited; no attempt to avoid singular points,
// callers filter by evaluating.
inline ExprPtr random_expr(Rng& rng, int depth) {
    const int pick = static_cast<int>(rng() % (depth <= 0 ? 2 : 10));
    switch (pick) {
        case 0: {
            double c = rand_real(rng, -2.5, 2.5);
            c = std::round(c * 16.0) / 16.0;
            return Expr::constant(std::abs(c) < 1e-12 ? 0.5 : std::abs(c));
        }
        case 1:
            return Expr::variable(rng() % 2 ? nullflow::Var::U : nullflow::Var::T);
        case 2:
            return Expr::unary(nullflow::UnaryOp::Neg, random_expr(rng, depth - 1));
        case 3:
            return Expr::unary(nullflow::UnaryOp::Sin, random_expr(rng, depth - 1));
        case 4:
            return Expr::unary(nullflow::UnaryOp::Cos, random_expr(rng, depth - 1));
        case 5:
            return Expr::binary(nullflow::BinaryOp::Add, random_expr(rng, depth - 1),
                                random_expr(rng, depth - 1));
        case 6:
            return Expr::binary(nullflow::BinaryOp::Sub, random_expr(rng, depth - 1),
                                random_expr(rng, depth - 1));
        case 7:
            return Expr::binary(nullflow::BinaryOp::Mul, random_expr(rng, depth - 1),
                                random_expr(rng, depth - 1));
        case 8:
            return Expr::binary(nullflow::BinaryOp::Div, random_expr(rng, depth - 1),
                                random_expr(rng, depth - 1));
        default: {
            const int e = 1 + static_cast<int>(rng() % 3);
            return Expr::binary(nullflow::BinaryOp::Pow, random_expr(rng, depth - 1),
                                Expr::constant(static_cast<double>(e)));
        }
    }
}

// True when the expression and its u-derivative evaluate to moderate finite
// values at every probe point, so a five-point stencil stays well conditioned.
inline bool tame_at(const ExprPtr& e, const std::vector<Bindings>& probes, double h) {
    try {
        const ExprPtr d = nullflow::differentiate(e, nullflow::Var::U);
        for (const Bindings& b : probes) {
            for (int k = -3; k <= 3; ++k) {
                Bindings shifted = b;
                shifted.u = *b.u + k * h;
                const double f = nullflow::eval(e, shifted);
                if (!std::isfinite(f) || std::abs(f) > 1e3) return false;
            }
            const double g = nullflow::eval(d, b);
            if (!std::isfinite(g) || std::abs(g) > 1e3) return false;
        }
    } catch (const nullflow::EvalError&) {
        return false;
    }
    return true;
}

// Five-point central derivative in u.
inline double fd5_u(const ExprPtr& e, const Bindings& b, double h) {
    auto at = [&](int k) {
        Bindings shifted = b;
        shifted.u = *b.u + k * h;
        return nullflow::eval(e, shifted);
    };
    return (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
}

// True when the stencil value is trustworthy at this point: halving h must
// reproduce it, otherwise the truncation term (h^4 times the fifth
// derivative) is still live and the comparison would test the stencil, not
// the symbolic derivative. Writes the h/2 value, the better of the two.
inline bool fd_converged(const ExprPtr& e, const Bindings& b, double h, double* out) {
    try {
        const double coarse = fd5_u(e, b, h);
        const double fine = fd5_u(e, b, h / 2);
        *out = fine;
        return std::abs(coarse - fine) <= 1e-8 * std::max(1.0, std::abs(fine));
    } catch (const nullflow::EvalError&) {
        return false;
    }
}

inline nullflow::Curvatures make_curvatures(const std::string& k1, const std::string& k2,
                                            const std::string& k3) {
    nullflow::Curvatures k;
    k.k1 = nullflow::parse_expression(k1);
    k.k2 = nullflow::parse_expression(k2);
    k.k3 = nullflow::parse_expression(k3);
    return k;
}

// Mirrors scenarios/pn_audit_generic.ini.
inline nullflow::EvolutionSetup pn_audit_setup() {
    nullflow::EvolutionSetup s;
    s.kind = nullflow::FrameKind::PartiallyNull;
    s.curvature = make_curvatures("1", "0.6", "0");
    s.initial_frame = nullflow::canonical_frame(s.kind);
    s.start = {0.0, 0.0, 0.0, 0.0};
    s.flow[0] =
        nullflow::parse_expression("0.15*(sin(u + 0.4) - u*cos(u + 0.4)) - 0.2*cos(u + 0.35)");
    s.flow[1] = nullflow::parse_expression("0.15*u*sin(u + 0.4) + 0.2*sin(u + 0.35)");
    s.flow[2] = nullflow::parse_expression("0.25 + 0.2*sin(u + 0.45)");
    s.flow[3] = nullflow::parse_expression("0.3 + 0.25*sin(u + 0.4)");
    s.grid.length = 0.8;
    s.grid.du = 0.025;
    s.grid.window = 0.02;
    s.grid.dt = 0.0025;
    return s;
}

// Mirrors scenarios/ps_audit_generic.ini.
inline nullflow::EvolutionSetup ps_audit_setup() {
    nullflow::EvolutionSetup s;
    s.kind = nullflow::FrameKind::PseudoNull;
    s.curvature = make_curvatures("1", "0.45", "0.8");
    s.initial_frame = nullflow::canonical_frame(s.kind);
    s.start = {0.0, 0.0, 0.0, 0.0};
    s.flow[0] = nullflow::parse_expression("0.28125*u - 0.1*cos(0.6*u + 0.4)");
    s.flow[1] = nullflow::parse_expression("0.5");
    s.flow[2] = nullflow::parse_expression("0");
    s.flow[3] = nullflow::parse_expression("0.28125 + 0.06*sin(0.6*u + 0.4)");
    s.grid.length = 0.8;
    s.grid.du = 0.025;
    s.grid.window = 4e-4;
    s.grid.dt = 5e-5;
    return s;
}

// Planar unit circle with k1 = 1, k2 = 0; the flow (1 - cos u, sin u, 0, 0)
// is inextensible on it and (u, 0, 0, 0) is not.
inline nullflow::EvolutionSetup pn_circle_setup(const std::string& c1, const std::string& c2) {
    nullflow::EvolutionSetup s;
    s.kind = nullflow::FrameKind::PartiallyNull;
    s.curvature = make_curvatures("1", "0", "0");
    s.initial_frame = nullflow::canonical_frame(s.kind);
    s.start = {0.0, 0.0, 0.0, 0.0};
    s.flow[0] = nullflow::parse_expression(c1);
    s.flow[1] = nullflow::parse_expression(c2);
    s.flow[2] = nullflow::parse_expression("0");
    s.flow[3] = nullflow::parse_expression("0");
    s.grid.length = 2.0;
    s.grid.du = 0.02;
    s.grid.window = 0.01;
    s.grid.dt = 5e-5;
    return s;
}

inline nullflow::EvolutionSetup zero_flow_setup(nullflow::FrameKind kind) {
    nullflow::EvolutionSetup s;
    s.kind = kind;
    s.curvature = kind == nullflow::FrameKind::PartiallyNull
                      ? make_curvatures("1", "0.6", "0")
                      : make_curvatures("1", "0.45", "0.8");
    s.initial_frame = nullflow::canonical_frame(kind);
    s.start = {0.0, 0.0, 0.0, 0.0};
    for (auto& c : s.flow) c = nullflow::parse_expression("0");
    s.grid.length = 0.5;
    s.grid.du = 0.025;
    s.grid.window = 0.01;
    s.grid.dt = 0.002;
    return s;
}

}  // namespace testsup
