#include "nullflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <string>

#include "nullflow/errors.hpp"
#include "nullflow/stencils.hpp"

namespace nullflow {

PsiField extract_psi(const CurveGrid& g) {
    if (g.nt < 3) throw Error("psi extraction needs at least three time slices");
    PsiField p;
    p.nu = g.nu;
    p.nt = g.nt;
    const std::size_t total = g.nu * g.nt;
    p.psi1.assign(total, 0.0);
    p.psi2.assign(total, 0.0);
    p.psi3.assign(total, 0.0);
    const double inv2dt = 1.0 / (2.0 * g.dt);
    for (std::size_t j = 1; j + 1 < g.nt; ++j)
        for (std::size_t i = 0; i < g.nu; ++i) {
            const std::size_t k = g.idx(i, j);
            const Frame4& f = g.frame[k];
            const Vec4 dn = inv2dt * (g.frame[g.idx(i, j + 1)].N - g.frame[g.idx(i, j - 1)].N);
            const Vec4 db1 = inv2dt * (g.frame[g.idx(i, j + 1)].B1 - g.frame[g.idx(i, j - 1)].B1);
            p.psi1[k] = dot(dn, f.B1);
            p.psi2[k] = dot(dn, f.B2);
            p.psi3[k] = dot(db1, f.B2);
        }
    return p;
}

namespace {

// Residuals at or below this (relative to the field scale) are roundoff, not
// truncation: the time-difference stencils amplify machine noise by 1/dt, so
// such sequences grow under refinement and must not face the order gate.
constexpr double kExactLevel = 1e-10;

double seq_order(const std::vector<double>& r) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        if (r[k] <= 0.0 && r[k + 1] <= 0.0) continue;
        if (r[k + 1] <= 0.0) {
            sum += 10.0;
        } else if (r[k] <= 0.0) {
            sum -= 10.0;
        } else {
            sum += std::log2(r[k] / r[k + 1]);
        }
        ++n;
    }
    return n ? sum / n : 0.0;
}

struct Acc {
    double max_abs = 0.0, sumsq = 0.0, scale = 1.0;
    std::size_t nodes = 0, skipped = 0;

    void add(double lhs, double rhs) {
        const double r = lhs - rhs;
        const double a = std::fabs(r);
        if (a > max_abs) max_abs = a;
        sumsq += r * r;
        ++nodes;
        scale = std::max({scale, std::fabs(lhs), std::fabs(rhs)});
    }
    void add(const Vec4& lhs, const Vec4& rhs) {
        for (int c = 0; c < 4; ++c) add(lhs[c], rhs[c]);
    }
    void skip() { ++skipped; }

    ResidualSample sample(const CurveGrid& g) const {
        ResidualSample s;
        s.du = g.du;
        s.dt = g.dt;
        s.ds = g.nu > 1 ? g.s[g.idx(g.nu - 1, 0)] / static_cast<double>(g.nu - 1) : 0.0;
        s.max_abs = max_abs;
        s.rms = nodes ? std::sqrt(sumsq / static_cast<double>(nodes)) : 0.0;
        s.scale = scale;
        s.nodes = nodes;
        s.skipped = skipped;
        return s;
    }
};

struct IdentityDef {
    const char* identity;
    const char* variant;
    bool printed;
    const char* note;
};

// Fixed emission order per curve kind. Evolution identities carrying a
// measured arclength-rate term are marked; the term vanishes identically on
// inextensible flows and restores exactness on extensible ones.
const char* kRateNote = "includes the measured arclength-rate term";
const char* kCommNote = "includes the arclength commutator term";

const std::vector<IdentityDef>& identity_table(FrameKind kind) {
    static const std::vector<IdentityDef> pn = {
        {"tangent_evolution", "", true, ""},
        {"normal_evolution", "", true, ""},
        {"binormal1_evolution", "", true, ""},
        {"binormal2_evolution", "+psi3", true, ""},
        {"binormal2_evolution", "-psi3", false, ""},
        {"k1_evolution", "", true, kRateNote},
        {"k1_psi1_ratio", "", true, ""},
        {"psi2_balance", "", true, ""},
        {"k1_slope_ratio", "", true, ""},
        {"k2_slope_ratio", "", true, ""},
        {"k2_evolution", "-beta2k1k2,-psi3k2", true, kRateNote},
        {"k2_evolution", "+beta2k1k2,-psi3k2", false, kRateNote},
        {"k2_evolution", "-beta2k1k2,+psi3k2", false, kRateNote},
        {"k2_evolution", "+beta2k1k2,+psi3k2", false, kRateNote},
        {"mixed_partials_tangent", "", true, kCommNote},
        {"mixed_partials_normal", "", true, kCommNote},
        {"mixed_partials_binormal1", "", true, kCommNote},
        {"mixed_partials_binormal2", "", true, kCommNote},
    };
    static const std::vector<IdentityDef> ps = {
        {"tangent_evolution", "", true, ""},
        {"normal_evolution", "", true, ""},
        {"binormal1_evolution", "", true, ""},
        {"binormal2_evolution", "", true, ""},
        {"psi1_balance", "", true, ""},
        {"psi2_balance", "", true, kRateNote},
        {"alpha4_balance", "alpha2k2", true, ""},
        {"alpha4_balance", "alpha2k2sq", false, ""},
        {"k3_slope", "s", true, ""},
        {"k3_slope", "t", false, kRateNote},
        {"k2_slope", "s", true, ""},
        {"k2_slope", "t", false, kRateNote},
        {"psi2_slope", "psi2k3", true, ""},
        {"psi2_slope", "psi3k2", false, ""},
        {"mixed_partials_tangent", "", true, kCommNote},
        {"mixed_partials_normal", "", true, kCommNote},
        {"mixed_partials_binormal1", "", true, kCommNote},
        {"mixed_partials_binormal2", "", true, kCommNote},
    };
    return kind == FrameKind::PartiallyNull ? pn : ps;
}

// Indices into identity_table; keep in sync with the lists above.
enum PnId {
    kPnTangent,
    kPnNormal,
    kPnBinormal1,
    kPnB2Plus,
    kPnB2Minus,
    kPnK1Evol,
    kPnK1Psi1,
    kPnPsi2Balance,
    kPnK1Slope,
    kPnK2Slope,
    kPnK2mm,
    kPnK2pm,
    kPnK2mp,
    kPnK2pp,
    kPnMix0,
};
enum PsId {
    kPsTangent,
    kPsNormal,
    kPsBinormal1,
    kPsBinormal2,
    kPsPsi1Balance,
    kPsPsi2Balance,
    kPsA4Lin,
    kPsA4Sq,
    kPsK3S,
    kPsK3T,
    kPsK2S,
    kPsK2T,
    kPsPsi2K3,
    kPsPsi3K2,
    kPsMix0,
};

struct IdentityResult {
    std::string identity, variant, note;
    bool printed = true;
    ResidualSample sample;
};

struct GridWork {
    CurveGrid grid;
    FlowCoefficients coeffs;
    PsiField psi;
    std::vector<double> mu;               // measured (dv/dt)/v, interior slices
    std::array<std::vector<Vec4>, 4> fs;  // arclength derivatives of T,N,B1,B2
};

const Vec4& frame_field(const Frame4& f, int which) {
    switch (which) {
        case 0: return f.T;
        case 1: return f.N;
        case 2: return f.B1;
        default: return f.B2;
    }
}

GridWork make_work(CurveGrid grid, const FlowCoefficients& coeffs) {
    GridWork w;
    w.grid = std::move(grid);
    w.coeffs = coeffs;
    w.psi = extract_psi(w.grid);
    const CurveGrid& g = w.grid;
    const std::size_t total = g.nu * g.nt;
    w.mu.assign(total, 0.0);
    for (std::size_t j = 1; j + 1 < g.nt; ++j)
        for (std::size_t i = 0; i < g.nu; ++i) {
            const std::size_t k = g.idx(i, j);
            w.mu[k] = (g.v[g.idx(i, j + 1)] - g.v[g.idx(i, j - 1)]) / (2.0 * g.dt) / g.v[k];
        }
    std::vector<Vec4> row(g.nu);
    for (int f = 0; f < 4; ++f) w.fs[f].resize(total);
    for (std::size_t j = 0; j < g.nt; ++j) {
        for (int f = 0; f < 4; ++f) {
            for (std::size_t i = 0; i < g.nu; ++i) row[i] = frame_field(g.frame[g.idx(i, j)], f);
            const std::vector<Vec4> d = derivative_samples(row, g.du);
            for (std::size_t i = 0; i < g.nu; ++i)
                w.fs[f][g.idx(i, j)] = d[i] / g.v[g.idx(i, j)];
        }
    }
    return w;
}

std::vector<IdentityResult> evaluate_identities(const GridWork& w) {
    const CurveGrid& g = w.grid;
    const bool pn = g.kind == FrameKind::PartiallyNull;
    const auto& defs = identity_table(g.kind);
    std::vector<Acc> acc(defs.size());
    if (g.nt < 3) throw Error("identity checks need at least three time slices");
    if (g.nu < 6) throw Error("identity checks need at least six u samples");

    // The identities are instantaneous statements whose hypotheses (class
    // preservation, inextensibility) hold exactly at t = 0 and drift at O(t)
    // for a generic scenario. Sampling a fixed number of initial steps keeps
    // that continuum drift proportional to dt, so it refines away with the
    // truncation error instead of flooring the residual at the window scale.
    const std::size_t jmax = std::min<std::size_t>(g.nt - 2, 2);

    std::vector<CoefficientSlice> cf(g.nt);
    for (std::size_t j = 1; j <= jmax; ++j) cf[j] = coefficient_slice(w.coeffs, g, j);

    // guard thresholds from interior denominator magnitudes
    double max_psi1 = 0.0, max_b4s = 0.0;
    for (std::size_t j = 1; j <= jmax; ++j)
        for (std::size_t i = 2; i + 2 < g.nu; ++i) {
            max_psi1 = std::max(max_psi1, std::fabs(w.psi.psi1[g.idx(i, j)]));
            max_b4s = std::max(max_b4s, std::fabs(cf[j].cs[3][i]));
        }
    const double guard_psi1 = 1e-6 * std::max(1.0, max_psi1);
    const double guard_b4s = 1e-6 * std::max(1.0, max_b4s);

    const std::size_t nu = g.nu;
    const double inv2dt = 1.0 / (2.0 * g.dt);
    std::vector<double> prow1(nu), prow2(nu), prow3(nu), k2row(nu), k3row(nu);
    std::vector<double> prodA(nu), prodB(nu), prodC(nu), prodD(nu);
    std::array<std::vector<Vec4>, 4> ftrow;
    for (auto& r : ftrow) r.resize(nu);

    for (std::size_t j = 1; j <= jmax; ++j) {
        const CoefficientSlice& c = cf[j];
        const double* k1r = &g.k1[g.idx(0, j)];
        const double* k2r = &g.k2[g.idx(0, j)];
        const double* k3r = &g.k3[g.idx(0, j)];
        for (std::size_t i = 0; i < nu; ++i) {
            const std::size_t k = g.idx(i, j);
            prow1[i] = w.psi.psi1[k];
            prow2[i] = w.psi.psi2[k];
            prow3[i] = w.psi.psi3[k];
            k2row[i] = k2r[i];
            k3row[i] = k3r[i];
        }
        const std::vector<double> psi1s = d_ds(prow1, g, j);
        const std::vector<double> psi2s = d_ds(prow2, g, j);
        const std::vector<double> psi3s = d_ds(prow3, g, j);
        std::vector<double> k2s, k3s, pAs, pBs, pCs, pDs;
        if (pn) {
            for (std::size_t i = 0; i < nu; ++i) {
                prodA[i] = c.c[0][i] * k1r[i];  // beta1*k1
                prodB[i] = c.c[3][i] * k2r[i];  // beta4*k2
                prodC[i] = c.c[1][i] * k2r[i];  // beta2*k2
            }
            pAs = d_ds(prodA, g, j);
            pBs = d_ds(prodB, g, j);
            pCs = d_ds(prodC, g, j);
        } else {
            for (std::size_t i = 0; i < nu; ++i) {
                prodA[i] = c.c[1][i] * k2r[i];  // alpha2*k2
                prodB[i] = c.c[3][i] * k3r[i];  // alpha4*k3
                prodC[i] = c.c[2][i] * k3r[i];  // alpha3*k3
                prodD[i] = c.c[2][i] * k2r[i];  // alpha3*k2
            }
            pAs = d_ds(prodA, g, j);
            pBs = d_ds(prodB, g, j);
            pCs = d_ds(prodC, g, j);
            pDs = d_ds(prodD, g, j);
            k2s = d_ds(k2row, g, j);
            k3s = d_ds(k3row, g, j);
        }
        // frame time derivatives along the slice and their s-derivatives
        std::array<std::vector<Vec4>, 4> dsft;
        for (int f = 0; f < 4; ++f) {
            for (std::size_t i = 0; i < nu; ++i)
                ftrow[f][i] = inv2dt * (frame_field(g.frame[g.idx(i, j + 1)], f) -
                                        frame_field(g.frame[g.idx(i, j - 1)], f));
            dsft[f] = derivative_samples(ftrow[f], g.du);
            for (std::size_t i = 0; i < nu; ++i) dsft[f][i] = dsft[f][i] / g.v[g.idx(i, j)];
        }

        for (std::size_t i = 2; i + 2 < nu; ++i) {
            const std::size_t k = g.idx(i, j);
            const Frame4& fr = g.frame[k];
            const double k1 = k1r[i], k2 = k2r[i], k3 = k3r[i];
            const double p1 = prow1[i], p2 = prow2[i], p3 = prow3[i];
            const double mu = w.mu[k];
            const Vec4 tt = ftrow[0][i], nt = ftrow[1][i], b1t = ftrow[2][i], b2t = ftrow[3][i];
            const double k1t =
                (g.k1[g.idx(i, j + 1)] - g.k1[g.idx(i, j - 1)]) * inv2dt;
            const double k2t =
                (g.k2[g.idx(i, j + 1)] - g.k2[g.idx(i, j - 1)]) * inv2dt;
            const double k3t =
                (g.k3[g.idx(i, j + 1)] - g.k3[g.idx(i, j - 1)]) * inv2dt;

            if (pn) {
                const double on_n = c.cs[1][i] + c.c[0][i] * k1 - c.c[3][i] * k2;
                const double on_b1 = c.cs[2][i] + c.c[1][i] * k2;
                const double on_b2 = c.cs[3][i];
                acc[kPnTangent].add(tt, on_n * fr.N + on_b1 * fr.B1 + on_b2 * fr.B2);
                acc[kPnNormal].add(nt, -on_n * fr.T + p2 * fr.B1 + p1 * fr.B2);
                acc[kPnBinormal1].add(b1t, -on_b2 * fr.T - p1 * fr.N + p3 * fr.B1);
                const Vec4 b2base = -on_b1 * fr.T - p2 * fr.N;
                acc[kPnB2Plus].add(b2t, b2base + p3 * fr.B2);
                acc[kPnB2Minus].add(b2t, b2base - p3 * fr.B2);
                acc[kPnK1Evol].add(k1t,
                                   c.css[1][i] + pAs[i] - pBs[i] - c.cs[3][i] * k2 - mu * k1);
                if (std::fabs(p1) >= guard_psi1)
                    acc[kPnK1Psi1].add(k1, c.css[3][i] / p1);
                else
                    acc[kPnK1Psi1].skip();
                acc[kPnPsi2Balance].add(c.css[2][i] + pCs[i] + c.cs[1][i] * k2 +
                                            c.c[0][i] * k1 * k2 - c.c[3][i] * k2 * k2,
                                        p2 * k1);
                if (std::fabs(c.cs[3][i]) >= guard_b4s)
                    acc[kPnK1Slope].add(k1, -psi1s[i] / c.cs[3][i]);
                else
                    acc[kPnK1Slope].skip();
                if (std::fabs(p1) >= guard_psi1)
                    acc[kPnK2Slope].add(k2, psi3s[i] / p1);
                else
                    acc[kPnK2Slope].skip();
                const double adv = c.c[1][i] * k1 * k2;
                const double gauge = p3 * k2;
                const double base = psi2s[i] + c.cs[2][i] * k1 - mu * k2;
                acc[kPnK2mm].add(k2t, base - adv - gauge);
                acc[kPnK2pm].add(k2t, base + adv - gauge);
                acc[kPnK2mp].add(k2t, base - adv + gauge);
                acc[kPnK2pp].add(k2t, base + adv + gauge);
                for (int f = 0; f < 4; ++f) {
                    const Vec4 dtfs = inv2dt * (w.fs[f][g.idx(i, j + 1)] - w.fs[f][g.idx(i, j - 1)]);
                    acc[kPnMix0 + f].add(dsft[f][i], dtfs + mu * w.fs[f][k]);
                }
            } else {
                const double on_n = c.cs[1][i] + c.c[0][i] + c.c[2][i] * k3;
                const double on_b1 = c.cs[2][i] + c.c[1][i] * k2 - c.c[3][i] * k3;
                const double on_b2 = c.cs[3][i] - c.c[2][i] * k2;
                acc[kPsTangent].add(tt, on_n * fr.N + on_b1 * fr.B1 + on_b2 * fr.B2);
                acc[kPsNormal].add(nt, -on_b2 * fr.T + p2 * fr.N + p1 * fr.B1);
                acc[kPsBinormal1].add(b1t, -on_b1 * fr.T + p3 * fr.N - p1 * fr.B2);
                acc[kPsBinormal2].add(b2t, -on_n * fr.T - p3 * fr.B1 - p2 * fr.B2);
                acc[kPsPsi1Balance].add(c.css[2][i] + pAs[i] - pBs[i] - c.cs[3][i] * k3 +
                                            c.cs[1][i] * k2 + c.c[0][i] * k2 +
                                            2.0 * c.c[2][i] * k3 * k2,
                                        p1);
                acc[kPsPsi2Balance].add(c.css[1][i] + c.cs[0][i] + pCs[i] + c.cs[2][i] * k3 +
                                            c.c[1][i] * k2 * k3 - c.c[3][i] * k3 * k3,
                                        p2 + mu);
                const double a4lhs = c.css[3][i] - pDs[i] - c.cs[2][i] * k2 + c.c[3][i] * k2 * k3;
                acc[kPsA4Lin].add(a4lhs, c.c[1][i] * k2);
                acc[kPsA4Sq].add(a4lhs, c.c[1][i] * k2 * k2);
                const double k3rhs = psi3s[i] - c.cs[2][i] - c.c[1][i] * k2 + c.c[3][i] * k3 -
                                     p2 * k3;
                acc[kPsK3S].add(k3s[i], k3rhs);
                acc[kPsK3T].add(k3t, k3rhs - mu * k3);
                const double k2rhs = psi1s[i] + p2 * k2;
                acc[kPsK2S].add(k2s[i], k2rhs);
                acc[kPsK2T].add(k2t, k2rhs - mu * k2);
                const double p2base = c.cs[3][i] - c.c[2][i] * k2 - p1 * k3;
                acc[kPsPsi2K3].add(psi2s[i], p2base + p2 * k3);
                acc[kPsPsi3K2].add(psi2s[i], p2base + p3 * k2);
                for (int f = 0; f < 4; ++f) {
                    const Vec4 dtfs = inv2dt * (w.fs[f][g.idx(i, j + 1)] - w.fs[f][g.idx(i, j - 1)]);
                    acc[kPsMix0 + f].add(dsft[f][i], dtfs + mu * w.fs[f][k]);
                }
            }
        }
    }

    std::vector<IdentityResult> out;
    out.reserve(defs.size());
    for (std::size_t q = 0; q < defs.size(); ++q) {
        IdentityResult r;
        r.identity = defs[q].identity;
        r.variant = defs[q].variant;
        r.printed = defs[q].printed;
        r.note = defs[q].note;
        r.sample = acc[q].sample(g);
        out.push_back(std::move(r));
    }
    return out;
}

bool sample_exact(const ResidualSample& s) {
    // Composed first-difference stencils amplify machine roundoff by about
    // 1/(du*dt); residuals at that level grow under refinement and must be
    // classified as noise rather than face the order gate.
    const double amplified =
        64.0 * std::numeric_limits<double>::epsilon() / std::max(s.du * s.dt, 1e-300);
    return s.max_abs <= std::max(kExactLevel, amplified) * s.scale;
}

bool sample_supported(const ResidualSample& s) {
    return s.skipped == 0 || s.nodes >= s.skipped;
}

void finalize_report(ResidualReport& rep, double pass_rtol, double min_order) {
    bool insufficient = false;
    bool all_exact = true;
    for (const ResidualSample& s : rep.samples) {
        if (!sample_supported(s)) insufficient = true;
        if (!sample_exact(s)) all_exact = false;
    }
    const auto note_add = [&](const char* extra) {
        if (!rep.note.empty()) rep.note += "; ";
        rep.note += extra;
    };
    if (insufficient) {
        rep.skipped = true;
        rep.pass = false;
        rep.order = 0.0;
        note_add("insufficient support (guard denominators vanish)");
        return;
    }
    if (all_exact) {
        rep.exact = true;
        rep.pass = true;
        rep.order = 0.0;
        note_add("exact at noise level");
        return;
    }
    rep.order = convergence_order(rep.samples);
    const ResidualSample& fine = rep.samples.back();
    rep.pass = fine.max_abs <= pass_rtol * fine.scale && rep.order >= min_order;
}

}  // namespace

double convergence_order(const std::vector<ResidualSample>& samples) {
    std::vector<double> r;
    r.reserve(samples.size());
    for (const auto& s : samples) r.push_back(s.max_abs);
    return seq_order(r);
}

std::vector<ResidualReport> run_verification(const EvolutionSetup& setup,
                                             const VerifyOptions& opts) {
    if (opts.refinements < 1) throw Error("verification needs at least one refinement");
    const FlowCoefficients coeffs = make_flow_coefficients(setup.kind, setup.flow);
    std::vector<std::vector<IdentityResult>> per_grid;
    for (int r = 0; r < opts.refinements; ++r) {
        EvolutionSetup s = setup;
        s.mode = opts.mode;
        s.grid.du = setup.grid.du / static_cast<double>(1 << r);
        s.grid.dt = setup.grid.dt / static_cast<double>(1 << r);
        per_grid.push_back(evaluate_identities(make_work(evolve(s), coeffs)));
    }
    std::vector<ResidualReport> reports;
    const std::size_t m = per_grid.front().size();
    reports.reserve(m);
    for (std::size_t q = 0; q < m; ++q) {
        ResidualReport rep;
        rep.identity = per_grid.front()[q].identity;
        rep.variant = per_grid.front()[q].variant;
        rep.printed = per_grid.front()[q].printed;
        rep.note = per_grid.front()[q].note;
        for (const auto& grid_results : per_grid) rep.samples.push_back(grid_results[q].sample);
        finalize_report(rep, opts.pass_rtol, opts.min_order);
        reports.push_back(std::move(rep));
    }
    if (opts.position_cross_check) {
        // One coarse grid, and a short run: re-extraction noise grows with
        // elapsed time regardless of the step size, so the cross-check keeps
        // to the few slices its time stencils need.
        EvolutionSetup s = setup;
        s.mode = EvolutionMode::Position;
        s.grid.dt = setup.grid.dt / 4.0;
        s.grid.window = 5.0 * s.grid.dt;
        const auto res = evaluate_identities(make_work(evolve(s), coeffs));
        for (std::size_t q = 0; q < m; ++q) reports[q].position_check = res[q].sample;
    }
    return reports;
}

bool all_identities_pass(const std::vector<ResidualReport>& reports) {
    std::map<std::string, std::pair<bool, bool>> groups;  // any pass, all skipped
    for (const auto& r : reports) {
        auto it = groups.try_emplace(r.identity, false, true).first;
        it->second.first = it->second.first || r.pass;
        it->second.second = it->second.second && r.skipped;
    }
    for (const auto& [name, state] : groups)
        if (!state.first && !state.second) return false;
    return true;
}

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

EvolutionSetup audit_scenario(FrameKind kind, std::uint64_t seed, int index) {
    std::mt19937_64 rng(seed * 1000003ull + static_cast<std::uint64_t>(index) * 97ull +
                        (kind == FrameKind::PseudoNull ? 500009ull : 0ull));
    const auto uniform = [&](double lo, double hi) {
        std::uniform_real_distribution<double> dist(lo, hi);
        return dist(rng);
    };
    EvolutionSetup s;
    s.kind = kind;
    s.initial_frame = canonical_frame(kind);
    s.start = Vec4{0.0, 0.0, 0.0, 0.0};
    // The pseudo null curvature subsystem is weakly ill posed for admissible
    // flows (the second-binormal balance ties alpha4*k3/k2 to alpha2), so its
    // audit window is kept short enough that backward growth seeded at
    // roundoff stays far below the truncation residuals being ranked.
    s.grid = kind == FrameKind::PseudoNull ? GridShape{0.8, 0.025, 4e-4, 5e-5}
                                           : GridShape{0.8, 0.025, 0.02, 0.0025};
    s.mode = EvolutionMode::Transport;
    if (kind == FrameKind::PartiallyNull) {
        // Inextensible at t = 0 (beta1' = beta2 at v = 1, k1 = 1) and preserving
        // the vanishing third curvature (beta4''' + beta4' = 0), with both
        // guard denominators sin/cos(u + phi) bounded away from zero on [0, l].
        const double c2 = uniform(0.4, 0.8);
        const double phi = uniform(0.32, 0.45);
        const double amp = uniform(0.2, 0.4);
        const double b = uniform(0.2, 0.35);
        const double d = uniform(0.15, 0.3);
        const double rho = uniform(0.3, 0.5);
        const double e0 = uniform(0.2, 0.35);
        const double e1 = uniform(0.15, 0.3);
        const double sig = uniform(0.3, 0.5);
        const std::string cb = fmt(c2 * b);
        const std::string ph = fmt(phi);
        const std::string dd = fmt(d);
        const std::string rh = fmt(rho);
        s.curvature.k1 = parse_expression("1");
        s.curvature.k2 = parse_expression(fmt(c2));
        s.curvature.k3 = parse_expression("0");
        s.flow[0] = parse_expression("(" + cb + ")*(sin(u + " + ph + ") - u*cos(u + " + ph +
                                     ")) - (" + dd + ")*cos(u + " + rh + ")");
        s.flow[1] = parse_expression("(" + cb + ")*u*sin(u + " + ph + ") + (" + dd +
                                     ")*sin(u + " + rh + ")");
        s.flow[2] = parse_expression("(" + fmt(e0) + ") + (" + fmt(e1) + ")*sin(u + " + fmt(sig) +
                                     ")");
        s.flow[3] = parse_expression("(" + fmt(amp) + ") + (" + fmt(b) + ")*sin(u + " + ph + ")");
    } else {
        // Inextensible at t = 0 (alpha1' = alpha4 at v = 1, k1 = 1) and
        // compatible with the second-binormal balance: alpha4'' + k2*k3*alpha4
        // = alpha2*k2^2 with constant alpha2, k2, k3 and alpha3 = 0.
        const double c2 = uniform(0.4, 0.5);
        const double c3 = uniform(0.75, 0.85);
        const double cc = uniform(0.4, 0.6);
        const double amp = uniform(0.05, 0.08);
        const double phi = uniform(0.3, 0.6);
        const double omega = std::sqrt(c2 * c3);
        const double ratio = cc * c2 / c3;
        s.curvature.k1 = parse_expression("1");
        s.curvature.k2 = parse_expression(fmt(c2));
        s.curvature.k3 = parse_expression(fmt(c3));
        s.flow[0] = parse_expression("(" + fmt(ratio) + ")*u - (" + fmt(amp / omega) +
                                     ")*cos((" + fmt(omega) + ")*u + " + fmt(phi) + ")");
        s.flow[1] = parse_expression(fmt(cc));
        s.flow[2] = parse_expression("0");
        s.flow[3] = parse_expression("(" + fmt(ratio) + ") + (" + fmt(amp) + ")*sin((" +
                                     fmt(omega) + ")*u + " + fmt(phi) + ")");
    }
    return s;
}

std::vector<AuditEntry> run_sign_audit(FrameKind kind, const AuditOptions& opts) {
    if (opts.scenarios < 1 || opts.refinements < 2)
        throw Error("the audit needs at least one scenario and two refinements");
    const auto& defs = identity_table(kind);
    std::map<std::string, int> variant_counts;
    for (const auto& d : defs) ++variant_counts[d.identity];

    // residuals[q][scenario][refinement], scales likewise
    std::vector<std::vector<std::vector<double>>> residuals(defs.size()), scales(defs.size());
    for (auto& v : residuals) v.resize(opts.scenarios);
    for (auto& v : scales) v.resize(opts.scenarios);

    for (int sc = 0; sc < opts.scenarios; ++sc) {
        const EvolutionSetup setup = audit_scenario(kind, opts.seed, sc);
        const FlowCoefficients coeffs = make_flow_coefficients(kind, setup.flow);
        for (int r = 0; r < opts.refinements; ++r) {
            EvolutionSetup s = setup;
            s.grid.du = setup.grid.du / static_cast<double>(1 << r);
            s.grid.dt = setup.grid.dt / static_cast<double>(1 << r);
            const auto results = evaluate_identities(make_work(evolve(s), coeffs));
            for (std::size_t q = 0; q < defs.size(); ++q) {
                residuals[q][sc].push_back(results[q].sample.max_abs);
                scales[q][sc].push_back(results[q].sample.scale);
            }
        }
    }

    const auto scenario_converges = [&](const std::vector<double>& r,
                                        const std::vector<double>& sl) {
        bool exact = true;
        for (std::size_t k = 0; k < r.size(); ++k)
            if (r[k] > kExactLevel * sl[k]) exact = false;
        if (exact) return true;
        for (std::size_t k = 0; k + 1 < r.size(); ++k)
            if (!(r[k + 1] < 0.75 * r[k])) return false;
        return seq_order(r) >= opts.min_order;
    };

    std::vector<AuditEntry> entries;
    for (std::size_t q = 0; q < defs.size(); ++q) {
        if (variant_counts[defs[q].identity] < 2) continue;
        AuditEntry* entry = nullptr;
        for (auto& e : entries)
            if (e.identity == defs[q].identity) entry = &e;
        if (!entry) {
            entries.push_back(AuditEntry{});
            entry = &entries.back();
            entry->identity = defs[q].identity;
        }
        AuditVariant var;
        var.variant = defs[q].variant;
        var.printed = defs[q].printed;
        var.converges = true;
        for (int sc = 0; sc < opts.scenarios; ++sc) {
            var.residuals.push_back(residuals[q][sc]);
            var.orders.push_back(seq_order(residuals[q][sc]));
            if (!scenario_converges(residuals[q][sc], scales[q][sc])) var.converges = false;
        }
        entry->variants.push_back(std::move(var));
    }
    for (auto& e : entries) {
        int winners = 0;
        for (const auto& v : e.variants)
            if (v.converges) {
                ++winners;
                e.winner = v.variant;
                e.printed_wins = v.printed;
            }
        e.unique = winners == 1;
        if (!e.unique) {
            e.winner.clear();
            e.printed_wins = false;
        }
    }
    return entries;
}

}  // namespace nullflow
