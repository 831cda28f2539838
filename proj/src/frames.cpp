#include "nullflow/frames.hpp"

#include <algorithm>
#include <cmath>

#include "nullflow/errors.hpp"
#include "nullflow/stencils.hpp"

namespace nullflow {

std::string to_string(FrameKind kind) {
    return kind == FrameKind::PartiallyNull ? "partially_null" : "pseudo_null";
}

std::array<double, 10> frame_residuals(const Frame4& f) {
    const double TT = dot(f.T, f.T), NN = dot(f.N, f.N), B11 = dot(f.B1, f.B1),
                 B22 = dot(f.B2, f.B2), B12 = dot(f.B1, f.B2), TN = dot(f.T, f.N),
                 TB1 = dot(f.T, f.B1), TB2 = dot(f.T, f.B2), NB1 = dot(f.N, f.B1),
                 NB2 = dot(f.N, f.B2);
    if (f.kind == FrameKind::PartiallyNull)
        return {TT - 1.0, NN - 1.0, B11, B22, B12 - 1.0, TN, TB1, TB2, NB1, NB2};
    return {TT - 1.0, B11 - 1.0, NN, B22, NB2 - 1.0, TN, TB1, TB2, NB1, B12};
}

double max_frame_residual(const Frame4& f) {
    double m = 0.0;
    for (double r : frame_residuals(f)) m = std::max(m, std::fabs(r));
    return m;
}

Frame4 canonical_frame(FrameKind kind) {
    Frame4 f;
    f.kind = kind;
    f.T = {0.0, 1.0, 0.0, 0.0};
    f.B2 = {-0.5, 0.0, 0.0, 0.5};
    if (kind == FrameKind::PartiallyNull) {
        f.N = {0.0, 0.0, 1.0, 0.0};
        f.B1 = {1.0, 0.0, 0.0, 1.0};
    } else {
        f.N = {1.0, 0.0, 0.0, 1.0};
        f.B1 = {0.0, 0.0, 1.0, 0.0};
    }
    return f;
}

FrameDerivative frenet_rhs(const Frame4& f, double k1, double k2, double k3) {
    if (f.kind == FrameKind::PartiallyNull) {
        if (k3 != 0.0) throw FrameError("partially null curves require k3 = 0");
        return {k1 * f.N, -k1 * f.T + k2 * f.B1, k3 * f.B1, -k2 * f.N - k3 * f.B2};
    }
    if (k1 != 0.0 && k1 != 1.0) throw FrameError("pseudo null curves require k1 in {0, 1}");
    return {k1 * f.N, k2 * f.B1, k3 * f.N - k2 * f.B2, -k1 * f.T - k3 * f.B1};
}

std::array<double, 4> frame_components(const Frame4& f, Vec4 x) {
    if (f.kind == FrameKind::PartiallyNull)
        return {dot(x, f.T), dot(x, f.N), dot(x, f.B2), dot(x, f.B1)};
    return {dot(x, f.T), dot(x, f.B2), dot(x, f.B1), dot(x, f.N)};
}

Vec4 frame_combination(const Frame4& f, const std::array<double, 4>& c) {
    return c[0] * f.T + c[1] * f.N + c[2] * f.B1 + c[3] * f.B2;
}

Vec4 null_partner(Vec4 n, std::span<const Vec4> ortho) {
    constexpr Vec4 axes[4] = {
        {1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 1.0}};
    Vec4 best_w{};
    double best_d = 0.0;
    for (Vec4 w : axes) {
        for (const Vec4& q : ortho) w -= dot(w, q) * q;
        // The output error scales as 1/|<n,w>|, so pick the strongest pairing;
        // ratios against |w| can spuriously favour near-vanishing residuals.
        const double d = dot(n, w);
        if (std::fabs(d) > std::fabs(best_d)) {
            best_w = w;
            best_d = d;
        }
    }
    const double nm = std::sqrt(component_norm_sq(n));
    if (std::fabs(best_d) <= 1e-9 * std::max(1.0, nm))
        throw DegeneracyError("cannot construct a null partner");
    const double ww = dot(best_w, best_w);
    return best_w / best_d - (ww / (2.0 * best_d * best_d)) * n;
}

Frame4 project_frame(const Frame4& f) {
    Frame4 g = f;
    const double tt = dot(g.T, g.T);
    if (!(tt > 0.0)) throw NumericalAbort("tangent lost its spacelike character");
    g.T = g.T / std::sqrt(tt);
    if (g.kind == FrameKind::PartiallyNull) {
        g.N -= dot(g.N, g.T) * g.T;
        const double nn = dot(g.N, g.N);
        if (!(nn > 0.0)) throw NumericalAbort("principal normal lost its spacelike character");
        g.N = g.N / std::sqrt(nn);
        const Vec4 span[2] = {g.T, g.N};
        g.B1 -= dot(g.B1, g.T) * g.T + dot(g.B1, g.N) * g.N;
        // two corrector sweeps push <B1,B1> to machine zero
        for (int pass = 0; pass < 2; ++pass)
            g.B1 -= (0.5 * dot(g.B1, g.B1)) * null_partner(g.B1, span);
        g.B2 = null_partner(g.B1, span);
    } else {
        // B1 first: it needs only T, and the null partner over {T, B1} is then
        // fully determined. A partner over {T} alone has a residual gauge
        // freedom, and using one to fix B1 shifts it O(1) along the normal.
        g.B1 -= dot(g.B1, g.T) * g.T;
        const double bb = dot(g.B1, g.B1);
        if (!(bb > 0.0)) throw NumericalAbort("first binormal lost its spacelike character");
        g.B1 = g.B1 / std::sqrt(bb);
        const Vec4 span[2] = {g.T, g.B1};
        g.N -= dot(g.N, g.T) * g.T + dot(g.N, g.B1) * g.B1;
        for (int pass = 0; pass < 2; ++pass)
            g.N -= (0.5 * dot(g.N, g.N)) * null_partner(g.N, span);
        g.B2 = null_partner(g.N, span);
    }
    return g;
}

void validate_curvatures(FrameKind kind, const Curvatures& k) {
    if (!k.k1 || !k.k2 || !k.k3) throw FrameError("curvatures k1, k2, k3 must all be provided");
    constexpr double samples[3] = {0.123, 0.77, 1.618};
    double k1v[3];
    for (int i = 0; i < 3; ++i) {
        Bindings b;
        b.s = samples[i];
        k1v[i] = eval(k.k1, b);
        eval(k.k2, b);
        const double k3v = eval(k.k3, b);
        if (kind == FrameKind::PartiallyNull && k3v != 0.0)
            throw FrameError("partially null curves require k3 = 0");
    }
    if (kind == FrameKind::PseudoNull) {
        for (double v : k1v)
            if (v != 0.0 && v != 1.0)
                throw FrameError("pseudo null curves require k1 constant 0 or 1");
        if (k1v[0] != k1v[1] || k1v[1] != k1v[2])
            throw FrameError("pseudo null curves require k1 constant 0 or 1");
    }
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

struct FrameState {
    Vec4 p, T, N, B1, B2;

    friend FrameState operator+(const FrameState& a, const FrameState& b) {
        return {a.p + b.p, a.T + b.T, a.N + b.N, a.B1 + b.B1, a.B2 + b.B2};
    }
    friend FrameState operator*(double c, const FrameState& a) {
        return {c * a.p, c * a.T, c * a.N, c * a.B1, c * a.B2};
    }
};

bool state_finite(const FrameState& y) {
    return all_finite(y.p) && all_finite(y.T) && all_finite(y.N) && all_finite(y.B1) &&
           all_finite(y.B2);
}

}  // namespace

FramedCurve integrate_curve(FrameKind kind, const Curvatures& k, const Frame4& f0, Vec4 p0,
                            double s0, double s1, double ds, bool project_steps) {
    validate_curvatures(kind, k);
    if (f0.kind != kind) throw FrameError("initial frame kind does not match the requested kind");
    if (max_frame_residual(f0) > 1e-12)
        throw FrameError("initial frame violates its metric relations beyond 1e-12");
    if (!all_finite(p0)) throw FrameError("initial position must be finite");
    if (!(ds > 0.0)) throw FrameError("step size must be positive");
    const double range = s1 - s0;
    if (range < 0.0) throw FrameError("s range must be non-decreasing");

    std::size_t n = 0;
    double h = 0.0;
    if (range > 0.0) {
        n = static_cast<std::size_t>(std::max<long long>(1, std::llround(range / ds)));
        h = range / static_cast<double>(n);
    }

    const auto eval_k = [&](double s) {
        Bindings b;
        b.s = s;
        return std::array<double, 3>{eval(k.k1, b), eval(k.k2, b), eval(k.k3, b)};
    };
    const auto rhs = [&](double s, const FrameState& y) {
        const auto kv = eval_k(s);
        const Frame4 fr{y.T, y.N, y.B1, y.B2, kind};
        const FrameDerivative d = frenet_rhs(fr, kv[0], kv[1], kv[2]);
        return FrameState{y.T, d.dT, d.dN, d.dB1, d.dB2};
    };

    FramedCurve out;
    out.kind = kind;
    out.s0 = s0;
    out.ds = h;
    out.s.reserve(n + 1);
    out.position.reserve(n + 1);
    out.frame.reserve(n + 1);
    out.k1.reserve(n + 1);
    out.k2.reserve(n + 1);
    out.k3.reserve(n + 1);

    FrameState y{p0, f0.T, f0.N, f0.B1, f0.B2};
    for (std::size_t i = 0; i <= n; ++i) {
        const double s = s0 + h * static_cast<double>(i);
        const auto kv = eval_k(s);
        out.s.push_back(s);
        out.position.push_back(y.p);
        out.frame.push_back(Frame4{y.T, y.N, y.B1, y.B2, kind});
        out.k1.push_back(kv[0]);
        out.k2.push_back(kv[1]);
        out.k3.push_back(kv[2]);
        if (i == n) break;
        const FrameState f1 = rhs(s, y);
        const FrameState f2 = rhs(s + 0.5 * h, y + (0.5 * h) * f1);
        const FrameState f3 = rhs(s + 0.5 * h, y + (0.5 * h) * f2);
        const FrameState f4 = rhs(s + h, y + h * f3);
        y = y + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
        if (!state_finite(y)) throw NumericalAbort("non-finite state during curve synthesis");
        if (project_steps) {
            const Frame4 projected = project_frame(Frame4{y.T, y.N, y.B1, y.B2, kind});
            y.T = projected.T;
            y.N = projected.N;
            y.B1 = projected.B1;
            y.B2 = projected.B2;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

// Leading-component normalization used by the FirstComponentUnit gauge and as
// the self-seed when no reference is available.
Vec4 first_component_unit(Vec4 w) {
    double amax = 0.0;
    for (int i = 0; i < 4; ++i) amax = std::max(amax, std::fabs(w[i]));
    for (int i = 0; i < 4; ++i)
        if (std::fabs(w[i]) >= 1e-9 * amax && w[i] != 0.0) return w / w[i];
    throw DegeneracyError("cannot normalize a zero vector");
}

}  // namespace

Vec4 unit_spacelike_completion(Vec4 candidate, const Vec4& T, const Vec4& N) {
    const Vec4 span_t[1] = {T};
    const Vec4 z = null_partner(N, span_t);
    const Vec4 w = candidate - dot(candidate, T) * T - dot(candidate, N) * z;
    const double q = dot(w, w);
    if (q > 1e-12) return w / std::sqrt(q);
    constexpr Vec4 axes[4] = {
        {0.0, 0.0, 0.0, 1.0}, {0.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}};
    Vec4 best{};
    double best_q = 0.0;
    for (Vec4 e : axes) {
        const Vec4 we = e - dot(e, T) * T - dot(e, N) * z;
        const double qe = dot(we, we);
        if (qe > best_q) {
            best_q = qe;
            best = we;
        }
    }
    if (best_q <= 1e-12) throw DegeneracyError("cannot complete a pseudo null frame");
    return best / std::sqrt(best_q);
}

FramedCurve extract_frames(std::span<const Vec4> positions, double s0, double ds, FrameKind kind,
                           const ExtractOptions& opts) {
    const std::size_t n = positions.size();
    if (n < 5) throw DegeneracyError("boundary stencil underflow: need at least 5 samples");
    if (!(ds > 0.0)) throw FrameError("step size must be positive");
    if (opts.reference_curve && opts.reference_curve->size() != n)
        throw FrameError("reference curve sample count does not match the positions");

    const std::vector<Vec4> dgamma = derivative_samples(positions, ds);
    std::vector<double> v(n);
    std::vector<Vec4> T(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = dot(dgamma[i], dgamma[i]);
        if (!(q > 0.0)) throw FrameError("curve tangent must be spacelike");
        v[i] = std::sqrt(q);
        if (v[i] < opts.degeneracy_threshold) throw DegeneracyError("vanishing tangent");
        if (opts.require_unit_speed && std::fabs(v[i] - 1.0) > opts.unit_speed_tol)
            throw FrameError("positions are not unit speed within tolerance");
        T[i] = dgamma[i] / v[i];
    }

    // d/ds = (1/v) d/du applied to a sampled field
    const auto s_deriv = [&](const std::vector<Vec4>& field) {
        std::vector<Vec4> d = derivative_samples(field, ds);
        for (std::size_t i = 0; i < n; ++i) d[i] = d[i] / v[i];
        return d;
    };

    const std::vector<Vec4> Ts = s_deriv(T);

    FramedCurve out;
    out.kind = kind;
    out.s0 = s0;
    out.ds = ds;
    out.s.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.s[i] = s0 + ds * static_cast<double>(i);
    out.position.assign(positions.begin(), positions.end());
    out.frame.resize(n);
    out.k1.resize(n);
    out.k2.resize(n);
    out.k3.resize(n);

    std::vector<Vec4> N(n), B1(n), B2(n);

    if (kind == FrameKind::PartiallyNull) {
        for (std::size_t i = 0; i < n; ++i) {
            const double q = dot(Ts[i], Ts[i]);
            const double k1m = std::sqrt(std::fabs(q));
            if (k1m < opts.degeneracy_threshold)
                throw DegeneracyError("first curvature vanished (straight segment)");
            if (q < 0.0) throw FrameError("principal normal must be spacelike");
            out.k1[i] = k1m;
            N[i] = Ts[i] / k1m;
        }
        const std::vector<Vec4> Ns = s_deriv(N);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec4 w = Ns[i] + out.k1[i] * T[i];  // = k2 B1
            Vec4 ref_b2{};
            bool have_ref = false;
            if (opts.reference_curve) {
                ref_b2 = opts.reference_curve->frame[i].B2;
                have_ref = true;
            } else if (opts.reference) {
                ref_b2 = opts.reference->B2;
                have_ref = true;
            }
            const double wmag = std::sqrt(component_norm_sq(w));
            // Below ~1e-6 * k1 the discrete w is stencil truncation rather
            // than a resolved k2*B1 direction, so treat it as k2 ~ 0.
            const double wfloor =
                std::max(opts.degeneracy_threshold, 1e-6 * std::max(1.0, out.k1[i]));
            if (wmag < wfloor) {
                // k2 ~ 0: the null direction is unconstrained here, reuse gauge
                if (i > 0)
                    B1[i] = B1[i - 1];
                else if (have_ref)
                    B1[i] = opts.reference_curve ? opts.reference_curve->frame[0].B1
                                                 : opts.reference->B1;
                else
                    throw DegeneracyError(
                        "first binormal undetermined: k2 vanishes and no reference frame given");
            } else if (opts.gauge == GaugePolicy::FirstComponentUnit || (!have_ref && i == 0)) {
                B1[i] = first_component_unit(w);
            } else {
                const Vec4 r = have_ref ? ref_b2 : B2[0];
                const double d = dot(w, r);
                if (std::fabs(d) < opts.degeneracy_threshold * wmag)
                    throw DegeneracyError("degenerate gauge pairing for the first binormal");
                B1[i] = w / d;
            }
            const Vec4 span[2] = {T[i], N[i]};
            B2[i] = null_partner(B1[i], span);
            out.k2[i] = dot(w, B2[i]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double m2 = component_norm_sq(Ts[i]);
            if (std::sqrt(m2) < opts.degeneracy_threshold)
                throw DegeneracyError("first curvature vanished (straight segment)");
            if (opts.require_unit_speed) {
                const double q = dot(Ts[i], Ts[i]);
                if (std::fabs(q) > 1e-6 * std::max(1.0, m2))
                    throw FrameError("principal normal is not null; curve is not pseudo null");
            }
            N[i] = Ts[i];  // k1 = 1 convention
        }
        const std::vector<Vec4> Ns = s_deriv(N);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec4 w = Ns[i];  // = k2 B1 with B1 unit spacelike
            const double q = dot(w, w);
            const double k2m = q > 0.0 ? std::sqrt(q) : 0.0;
            Vec4 ref_b1{};
            bool have_ref = false;
            if (opts.reference_curve) {
                ref_b1 = opts.reference_curve->frame[i].B1;
                have_ref = true;
            } else if (opts.reference) {
                ref_b1 = opts.reference->B1;
                have_ref = true;
            }
            // Same truncation floor as the partially null branch: an
            // unresolved Ns direction must not be normalised into a frame leg.
            const double k2floor = std::max(
                opts.degeneracy_threshold,
                1e-6 * std::max(1.0, std::sqrt(component_norm_sq(N[i]))));
            if (k2m < k2floor) {
                Vec4 cand;
                if (i > 0)
                    cand = B1[i - 1];
                else if (have_ref)
                    cand = ref_b1;
                else
                    cand = {0.0, 0.0, 0.0, 1.0};
                B1[i] = unit_spacelike_completion(cand, T[i], N[i]);
            } else {
                double sign = 1.0;  // k2 >= 0 at the start by convention
                if (i > 0)
                    sign = dot(w, B1[i - 1]) >= 0.0 ? 1.0 : -1.0;
                else if (have_ref)
                    sign = dot(w, ref_b1) >= 0.0 ? 1.0 : -1.0;
                B1[i] = (1.0 / (sign * k2m)) * w;
            }
            const Vec4 span[2] = {T[i], B1[i]};
            B2[i] = null_partner(N[i], span);
            out.k1[i] = dot(Ts[i], B2[i]);
            out.k2[i] = dot(Ns[i], B1[i]);
        }
    }

    const std::vector<Vec4> B1s = s_deriv(B1);
    for (std::size_t i = 0; i < n; ++i) {
        out.k3[i] = dot(B1s[i], B2[i]);
        out.frame[i] = Frame4{T[i], N[i], B1[i], B2[i], kind};
    }
    return out;
}

}  // namespace nullflow
