#include <doctest.h>

#include <nullflow/errors.hpp>
#include <nullflow/frames.hpp>

#include <cmath>
#include <vector>

#include "support/helpers.hpp"

using namespace nullflow;

namespace {

double pairing_drift(const Frame4& f, const FrameDerivative& d) {
    // d/ds of every metric pairing must vanish when the derivative comes from
    // the structural equations; each term is <df, g> + <f, dg>.
    const Vec4 fs[4] = {f.T, f.N, f.B1, f.B2};
    const Vec4 ds[4] = {d.dT, d.dN, d.dB1, d.dB2};
    double worst = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b)
            worst = std::max(worst, std::abs(dot(ds[a], fs[b]) + dot(fs[a], ds[b])));
    return worst;
}

Frame4 perturbed(Frame4 f, testsup::Rng& rng, double eps) {
    Vec4* vs[4] = {&f.T, &f.N, &f.B1, &f.B2};
    for (Vec4* v : vs)
        for (int i = 0; i < 4; ++i) (*v)[i] += testsup::rand_real(rng, -eps, eps);
    return f;
}

double frame_distance(const Frame4& a, const Frame4& b) {
    double worst = 0.0;
    const Vec4 va[4] = {a.T, a.N, a.B1, a.B2};
    const Vec4 vb[4] = {b.T, b.N, b.B1, b.B2};
    for (int k = 0; k < 4; ++k)
        worst = std::max(worst, std::sqrt(component_norm_sq(va[k] - vb[k])));
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("frames");

TEST_CASE("canonical frames satisfy their pairings exactly") {
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        const Frame4 f = canonical_frame(kind);
        CHECK(max_frame_residual(f) == 0.0);
        for (double r : frame_residuals(f)) CHECK(r == 0.0);
    }
}

TEST_CASE("structural equations preserve the pairings infinitesimally") {
    testsup::Rng rng(5);
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        const Frame4 f = canonical_frame(kind);
        for (int it = 0; it < 20; ++it) {
            const double k1 = kind == FrameKind::PseudoNull ? 1.0 : testsup::rand_real(rng, 0.2, 3);
            const double k2 = testsup::rand_real(rng, -2, 2);
            const double k3 = kind == FrameKind::PartiallyNull ? 0.0 : testsup::rand_real(rng, -2, 2);
            CHECK(pairing_drift(f, frenet_rhs(f, k1, k2, k3)) <= 1e-14);
        }
    }
}

TEST_CASE("partially null structural equations componentwise") {
    const Frame4 f = canonical_frame(FrameKind::PartiallyNull);
    const FrameDerivative d = frenet_rhs(f, 2.0, 0.7, 0.0);
    CHECK(d.dT == 2.0 * f.N);
    CHECK(d.dN == -2.0 * f.T + 0.7 * f.B1);
    CHECK(d.dB1 == Vec4{0, 0, 0, 0});
    CHECK(d.dB2 == -0.7 * f.N);
}

TEST_CASE("pseudo null structural equations componentwise") {
    const Frame4 f = canonical_frame(FrameKind::PseudoNull);
    const FrameDerivative d = frenet_rhs(f, 1.0, 0.45, 0.8);
    CHECK(d.dT == f.N);
    CHECK(d.dN == 0.45 * f.B1);
    CHECK(d.dB1 == 0.8 * f.N - 0.45 * f.B2);
    CHECK(d.dB2 == -1.0 * f.T - 0.8 * f.B1);
}

TEST_CASE("frame_components inverts frame_combination") {
    testsup::Rng rng(11);
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        const Frame4 f = canonical_frame(kind);
        for (int it = 0; it < 50; ++it) {
            std::array<double, 4> c;
            for (double& x : c) x = testsup::rand_real(rng, -3, 3);
            const Vec4 v = frame_combination(f, c);
            const auto back = frame_components(f, v);
            for (int i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(c[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("null_partner satisfies its contract") {
    const Frame4 f = canonical_frame(FrameKind::PartiallyNull);
    const Vec4 span[2] = {f.T, f.N};
    const Vec4 b = null_partner(f.B1, span);
    CHECK(std::abs(dot(b, b)) <= 1e-14);
    CHECK(dot(f.B1, b) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(dot(b, f.T)) <= 1e-14);
    CHECK(std::abs(dot(b, f.N)) <= 1e-14);
}

TEST_CASE("unit_spacelike_completion fills the gap") {
    const Frame4 f = canonical_frame(FrameKind::PseudoNull);
    const Vec4 w = unit_spacelike_completion({0.3, -0.2, 1.4, 0.5}, f.T, f.N);
    CHECK(dot(w, w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(dot(w, f.T)) <= 1e-12);
    CHECK(std::abs(dot(w, f.N)) <= 1e-12);
    // A degenerate candidate still produces a valid completion.
    const Vec4 w2 = unit_spacelike_completion({0, 0, 0, 0}, f.T, f.N);
    CHECK(dot(w2, w2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(dot(w2, f.T)) <= 1e-12);
    CHECK(std::abs(dot(w2, f.N)) <= 1e-12);
}

TEST_CASE("project_frame restores exact pairings after a small kick") {
    testsup::Rng rng(23);
    for (FrameKind kind : {FrameKind::PartiallyNull, FrameKind::PseudoNull}) {
        const Frame4 clean = canonical_frame(kind);
        for (int it = 0; it < 40; ++it) {
            const double eps = 1e-4;
            const Frame4 dirty = perturbed(clean, rng, eps);
            const Frame4 fixed = project_frame(dirty);
            CHECK(max_frame_residual(fixed) <= 1e-12);
            // The correction stays of the same order as the kick; in
            // particular no O(1) gauge shift is allowed.
            CHECK(frame_distance(fixed, dirty) <= 20 * eps);
        }
        CHECK(frame_distance(project_frame(clean), clean) <= 1e-15);
    }
}

TEST_CASE("integrate_curve preserves the pairings along the way") {
    SUBCASE("partially null") {
        const auto k = testsup::make_curvatures("2 + sin(s)", "cos(2*s)", "0");
        const FramedCurve c = integrate_curve(FrameKind::PartiallyNull, k,
                                              canonical_frame(FrameKind::PartiallyNull),
                                              {0, 0, 0, 0}, 0.0, 1.0, 1e-3);
        REQUIRE(c.size() == 1001);
        double worst = 0.0;
        for (const Frame4& f : c.frame) worst = std::max(worst, max_frame_residual(f));
        CHECK(worst <= 1e-8);

        // k3 = 0 makes B1 parallel along the curve.
        double drift = 0.0;
        for (const Frame4& f : c.frame)
            drift = std::max(drift, std::sqrt(component_norm_sq(f.B1 - c.frame[0].B1)));
        CHECK(drift <= 1e-8);
    }
    SUBCASE("pseudo null") {
        const auto k = testsup::make_curvatures("1", "0.45 + 0.2*sin(s)", "0.8 + 0.3*cos(s)");
        const FramedCurve c = integrate_curve(FrameKind::PseudoNull, k,
                                              canonical_frame(FrameKind::PseudoNull),
                                              {0, 0, 0, 0}, 0.0, 1.0, 1e-3);
        double worst = 0.0;
        for (const Frame4& f : c.frame) worst = std::max(worst, max_frame_residual(f));
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("validate_curvatures rejects out-of-class prescriptions") {
    CHECK_THROWS_AS(validate_curvatures(FrameKind::PartiallyNull,
                                        testsup::make_curvatures("1", "0.5", "0.1")),
                    FrameError);
    CHECK_THROWS_AS(validate_curvatures(FrameKind::PseudoNull,
                                        testsup::make_curvatures("0.5", "0.5", "0.1")),
                    FrameError);
    // Curvatures depend on s only; u or t surfaces as an unbound variable.
    CHECK_THROWS_AS(validate_curvatures(FrameKind::PartiallyNull,
                                        testsup::make_curvatures("1 + u", "0.5", "0")),
                    EvalError);
    CHECK_THROWS_AS(validate_curvatures(FrameKind::PartiallyNull,
                                        testsup::make_curvatures("1 + t", "0.5", "0")),
                    EvalError);
    CHECK_NOTHROW(validate_curvatures(FrameKind::PartiallyNull,
                                      testsup::make_curvatures("1 + s^2", "0.5", "0")));
    CHECK_NOTHROW(validate_curvatures(FrameKind::PseudoNull,
                                      testsup::make_curvatures("0", "0.5", "0.1")));
}

TEST_CASE("extraction recovers the exponential circle invariants") {
    // gamma(s) = (e^s, cos s, sin s, e^s) is unit speed with first curvature
    // identically 1 and first binormal parallel to (1, 0, 0, 1).
    const double ds = 1.0 / 512.0;
    const std::size_t n = 513;
    std::vector<Vec4> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = i * ds;
        pos[i] = {std::exp(s), std::cos(s), std::sin(s), std::exp(s)};
    }
    Frame4 ref;
    ref.kind = FrameKind::PartiallyNull;
    ref.T = {1, 0, 1, 1};
    ref.N = {1, -1, 0, 1};
    ref.B1 = {1, 0, 0, 1};
    ref.B2 = {-1.5, 1, -1, -0.5};
    REQUIRE(max_frame_residual(ref) <= 1e-12);

    ExtractOptions opts;
    opts.gauge = GaugePolicy::ReferenceFrame;
    opts.reference = ref;
    const FramedCurve c = extract_frames(pos, 0.0, ds, FrameKind::PartiallyNull, opts);

    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(c.k1[i] - 1.0) <= 1e-6);
        const Vec4 b1 = c.frame[i].B1;
        const double scale = std::abs(b1.x1);
        REQUIRE(scale > 0.0);
        CHECK(std::abs(b1.x2) <= 1e-6 * scale);
        CHECK(std::abs(b1.x3) <= 1e-6 * scale);
        CHECK(std::abs(b1.x4 - b1.x1) <= 1e-6 * scale);
    }
    // Second curvature is 2 e^s in this gauge.
    for (std::size_t i = 0; i < n; ++i)
        CHECK(c.k2[i] == doctest::Approx(2.0 * std::exp(c.s[i])).epsilon(1e-4));
}

TEST_CASE("extraction handles a degenerate second curvature") {
    // Planar circle: k2 vanishes identically, so the principal-normal
    // derivative leaves no null direction to normalize; the relative floor
    // must keep the gauge fallback quiet instead of amplifying noise.
    const auto k = testsup::make_curvatures("1", "0", "0");
    const FramedCurve truth = integrate_curve(FrameKind::PartiallyNull, k,
                                              canonical_frame(FrameKind::PartiallyNull),
                                              {0, 0, 0, 0}, 0.0, 2.0, 0.02);
    ExtractOptions opts;
    opts.gauge = GaugePolicy::ReferenceFrame;
    opts.reference_curve = &truth;
    FramedCurve got;
    REQUIRE_NOTHROW(got = extract_frames(truth.position, 0.0, 0.02,
                                         FrameKind::PartiallyNull, opts));
    double worst_k2 = 0.0;
    for (double v : got.k2) worst_k2 = std::max(worst_k2, std::abs(v));
    CHECK(worst_k2 <= 1e-5);
}

TEST_CASE("pseudo null synthesize/extract round trip") {
    const auto k = testsup::make_curvatures("1", "0.45", "0.8");
    const double ds = 0.005;
    const FramedCurve truth = integrate_curve(FrameKind::PseudoNull, k,
                                              canonical_frame(FrameKind::PseudoNull),
                                              {0, 0, 0, 0}, 0.0, 0.8, ds);
    ExtractOptions opts;
    opts.gauge = GaugePolicy::ReferenceFrame;
    opts.reference_curve = &truth;
    const FramedCurve got = extract_frames(truth.position, 0.0, ds, FrameKind::PseudoNull, opts);
    REQUIRE(got.size() == truth.size());
    // Compare away from the ends where the stencils switch to one-sided forms.
    for (std::size_t i = 4; i + 4 < got.size(); ++i) {
        CHECK(got.k2[i] == doctest::Approx(0.45).epsilon(1e-4));
        CHECK(got.k3[i] == doctest::Approx(0.8).epsilon(1e-4));
    }
}

TEST_CASE("extraction aborts on a straight segment") {
    const double ds = 0.01;
    std::vector<Vec4> pos(101);
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = {0.0, i * ds, 0.0, 0.0};
    ExtractOptions opts;
    CHECK_THROWS_AS(extract_frames(pos, 0.0, ds, FrameKind::PartiallyNull, opts),
                    DegeneracyError);
}

TEST_SUITE_END();
