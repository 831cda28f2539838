#include <doctest.h>

#include <nullflow/errors.hpp>
#include <nullflow/flow.hpp>

#include <cmath>
#include <vector>

#include "support/helpers.hpp"

using namespace nullflow;

namespace {

bool slices_identical(const CurveGrid& g, std::size_t ja, std::size_t jb) {
    for (std::size_t i = 0; i < g.nu; ++i) {
        const std::size_t a = g.idx(i, ja), b = g.idx(i, jb);
        if (!(g.position[a] == g.position[b])) return false;
        if (!(g.frame[a].T == g.frame[b].T && g.frame[a].N == g.frame[b].N &&
              g.frame[a].B1 == g.frame[b].B1 && g.frame[a].B2 == g.frame[b].B2))
            return false;
        if (g.v[a] != g.v[b] || g.k1[a] != g.k1[b] || g.k2[a] != g.k2[b] || g.k3[a] != g.k3[b])
            return false;
        if (g.s[a] != g.s[b]) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("flow");

TEST_CASE("make_flow_coefficients differentiates symbolically") {
    std::array<ExprPtr, 4> c = {parse_expression("u^2*t"), parse_expression("sin(u)"),
                                parse_expression("0"), parse_expression("1")};
    const FlowCoefficients fc = make_flow_coefficients(FrameKind::PartiallyNull, c);
    Bindings b;
    b.u = 0.7;
    b.t = 0.3;
    CHECK(eval(fc.cu[0], b) == doctest::Approx(2 * 0.7 * 0.3).epsilon(1e-14));
    CHECK(eval(fc.cuu[0], b) == doctest::Approx(2 * 0.3).epsilon(1e-14));
    CHECK(eval(fc.cu[1], b) == doctest::Approx(std::cos(0.7)).epsilon(1e-14));
    CHECK(eval(fc.cuu[1], b) == doctest::Approx(-std::sin(0.7)).epsilon(1e-14));
    CHECK(eval(fc.cu[3], b) == 0.0);
}

TEST_CASE("flow_velocity combines the frame directions") {
    const Frame4 f = canonical_frame(FrameKind::PartiallyNull);
    std::array<ExprPtr, 4> zero = {parse_expression("0"), parse_expression("0"),
                                   parse_expression("0"), parse_expression("0")};
    const FlowCoefficients z = make_flow_coefficients(FrameKind::PartiallyNull, zero);
    CHECK(flow_velocity(z, f, 0.3, 0.1) == Vec4{0, 0, 0, 0});

    std::array<ExprPtr, 4> tangent = {parse_expression("1"), parse_expression("0"),
                                      parse_expression("0"), parse_expression("0")};
    const FlowCoefficients ft = make_flow_coefficients(FrameKind::PartiallyNull, tangent);
    CHECK(flow_velocity(ft, f, 0.3, 0.1) == f.T);

    std::array<ExprPtr, 4> mixed = {parse_expression("u"), parse_expression("2"),
                                    parse_expression("0"), parse_expression("t")};
    const FlowCoefficients fm = make_flow_coefficients(FrameKind::PartiallyNull, mixed);
    CHECK(flow_velocity(fm, f, 0.5, 0.25) == 0.5 * f.T + 2.0 * f.N + 0.25 * f.B2);
}

TEST_CASE("zero flow leaves the grid bit-identical") {
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        for (EvolutionMode mode : {EvolutionMode::Transport, EvolutionMode::Position}) {
            EvolutionSetup s = testsup::zero_flow_setup(kind);
            s.mode = mode;
            const CurveGrid g = evolve(s);
            REQUIRE(g.nt >= 3);
            for (std::size_t j = 1; j < g.nt; ++j) CHECK(slices_identical(g, 0, j));
        }
    }
}

TEST_CASE("base slice is unit speed with the prescribed arclength") {
    const CurveGrid g = evolve(testsup::pn_audit_setup());
    const std::vector<double> v = slice_speeds(g, 0);
    for (std::size_t i = 0; i < g.nu; ++i) CHECK(v[i] == doctest::Approx(1.0).epsilon(1e-6));
    const Arclength a = arclength(g, 0);
    CHECK(a.total == doctest::Approx(g.length).epsilon(1e-6));
    CHECK(a.s.front() == 0.0);
    CHECK(a.s.back() == doctest::Approx(a.total));
}

TEST_CASE("closed-form dv/dt matches a time difference of the speed") {
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        EvolutionSetup s = kind == FrameKind::PartiallyNull ? testsup::pn_audit_setup()
                                                            : testsup::ps_audit_setup();
        s.grid.window = 4 * s.grid.dt;
        const CurveGrid g = evolve(s);
        REQUIRE(g.nt >= 3);
        const FlowCoefficients fc = make_flow_coefficients(kind, s.flow);
        const std::vector<double> vm = slice_speeds(g, 0);
        const std::vector<double> vp = slice_speeds(g, 2);
        double worst = 0.0;
        for (std::size_t i = 2; i + 2 < g.nu; ++i) {
            const double fd = (vp[i] - vm[i]) / (2 * g.dt);
            worst = std::max(worst, std::abs(fd - dv_dt_formula(fc, g, i, 1)));
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("inextensibility defect separates preserving and stretching flows") {
    SUBCASE("circle flow preserves arclength pointwise") {
        const EvolutionSetup s = testsup::pn_circle_setup("1 - cos(u)", "sin(u)");
        const CurveGrid g = evolve(s);
        const FlowCoefficients fc = make_flow_coefficients(s.kind, s.flow);
        for (std::size_t i = 2; i + 2 < g.nu; i += 7)
            CHECK(std::abs(inextensibility_defect(fc, g, i, 0)) <= 1e-6);
    }
    SUBCASE("tangent ramp stretches at unit rate") {
        const EvolutionSetup s = testsup::pn_circle_setup("u", "0");
        const CurveGrid g = evolve(s);
        const FlowCoefficients fc = make_flow_coefficients(s.kind, s.flow);
        for (std::size_t i = 2; i + 2 < g.nu; i += 7)
            CHECK(inextensibility_defect(fc, g, i, 0) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("arclength is conserved under an inextensible flow and not otherwise") {
    EvolutionSetup s = testsup::pn_circle_setup("1 - cos(u)", "sin(u)");
    s.grid.window = 0.02;
    s.grid.dt = 1e-4;
    const CurveGrid g = evolve(s);
    REQUIRE(g.nt >= 100);
    const double total0 = arclength(g, 0).total;
    double drift = 0.0;
    for (std::size_t j = 1; j < g.nt; ++j)
        drift = std::max(drift, std::abs(arclength(g, j).total - total0));
    CHECK(drift / total0 <= 1e-6);

    EvolutionSetup ctrl = testsup::pn_circle_setup("u", "0");
    ctrl.grid.window = 0.02;
    ctrl.grid.dt = 1e-4;
    const CurveGrid h = evolve(ctrl);
    const double htotal0 = arclength(h, 0).total;
    const double hfinal = arclength(h, h.nt - 1).total;
    CHECK(std::abs(hfinal - htotal0) / htotal0 >= 1e-2);
}

TEST_CASE("arclength rate: finite difference agrees with the closed form") {
    EvolutionSetup s = testsup::pn_circle_setup("u", "0");
    s.grid.window = 0.002;
    s.grid.dt = 5e-5;
    const CurveGrid g = evolve(s);
    const FlowCoefficients fc = make_flow_coefficients(s.kind, s.flow);
    const std::vector<double> fd =
        arclength_time_derivative(g, fc, 1, ArclengthRateMode::FiniteDifference);
    const std::vector<double> cf = arclength_time_derivative(g, fc, 1, ArclengthRateMode::Formula);
    REQUIRE(fd.size() == g.nu);
    REQUIRE(cf.size() == g.nu);
    for (std::size_t i = 0; i < g.nu; ++i) {
        // ds/dt = u for this flow (unit defect integrated from the left end).
        CHECK(fd[i] == doctest::Approx(g.u(i)).epsilon(2e-3));
        CHECK(std::abs(fd[i] - cf[i]) <= 2e-3 * std::max(1.0, std::abs(cf[i])));
    }
}

TEST_CASE("transport and position modes agree over a short window") {
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        EvolutionSetup s = kind == FrameKind::PartiallyNull ? testsup::pn_audit_setup()
                                                            : testsup::ps_audit_setup();
        if (kind == FrameKind::PartiallyNull) {
            s.grid.dt = 5e-4;
            s.grid.window = 2e-3;
        } else {
            s.grid.dt = 5e-5;
            s.grid.window = 2e-4;
        }
        EvolutionSetup sp = s;
        sp.mode = EvolutionMode::Position;
        const CurveGrid gt = evolve(s);
        const CurveGrid gp = evolve(sp);
        REQUIRE(gt.nt == gp.nt);
        const double bound = 10.0 * (s.grid.dt + s.grid.du * s.grid.du) * s.grid.window;
        double worst = 0.0;
        for (std::size_t k = 0; k < gt.position.size(); ++k)
            worst = std::max(worst,
                             std::sqrt(component_norm_sq(gt.position[k] - gp.position[k])));
        CHECK(worst <= bound);
    }
}

TEST_CASE("evolve validates its grid") {
    EvolutionSetup s = testsup::zero_flow_setup(FrameKind::PartiallyNull);
    s.grid.du = 0.0;
    CHECK_THROWS_AS(evolve(s), Error);

    s = testsup::zero_flow_setup(FrameKind::PartiallyNull);
    s.grid.dt = 2 * s.grid.du;
    CHECK_THROWS_AS(evolve(s), Error);
}

TEST_CASE("runaway stability requirements abort instead of stalling") {
    EvolutionSetup s = testsup::pn_circle_setup("40000", "0");
    s.grid.window = 0.04;
    s.grid.dt = 0.02;
    CHECK_THROWS_AS(evolve(s), NumericalAbort);
}

TEST_SUITE_END();
