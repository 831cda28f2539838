#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nullflow/expression.hpp"
#include "nullflow/minkowski.hpp"

namespace nullflow {

enum class FrameKind { PartiallyNull, PseudoNull };

std::string to_string(FrameKind kind);

struct Frame4 {
    Vec4 T, N, B1, B2;
    FrameKind kind = FrameKind::PartiallyNull;
};

/// Deviations of the ten pairings from their required values. Order:
///   PartiallyNull: <T,T>-1, <N,N>-1, <B1,B1>, <B2,B2>, <B1,B2>-1,
///                  <T,N>, <T,B1>, <T,B2>, <N,B1>, <N,B2>
///   PseudoNull:    <T,T>-1, <B1,B1>-1, <N,N>, <B2,B2>, <N,B2>-1,
///                  <T,N>, <T,B1>, <T,B2>, <N,B1>, <B1,B2>
std::array<double, 10> frame_residuals(const Frame4& f);
double max_frame_residual(const Frame4& f);

Frame4 canonical_frame(FrameKind kind);

struct FrameDerivative {
    Vec4 dT, dN, dB1, dB2;
};

/// Right-hand side of the frame ODE system at the given curvature values.
FrameDerivative frenet_rhs(const Frame4& f, double k1, double k2, double k3);

/// Coefficients (a,b,c,d) with x = a T + b N + c B1 + d B2, recovered through
/// the kind's pairing table.
std::array<double, 4> frame_components(const Frame4& f, Vec4 x);
Vec4 frame_combination(const Frame4& f, const std::array<double, 4>& c);

/// Nearest frame satisfying the metric relations exactly (used by the
/// optional per-step projection and available for diagnostics).
Frame4 project_frame(const Frame4& f);

struct Curvatures {
    ExprPtr k1, k2, k3;
};

/// Enforce kind constraints (k3 = 0 partially null; k1 constant 0 or 1 pseudo
/// null) by sampling; also rejects curvature expressions that use u or t.
void validate_curvatures(FrameKind kind, const Curvatures& k);

struct FramedCurve {
    FrameKind kind = FrameKind::PartiallyNull;
    double s0 = 0.0;
    double ds = 0.0;
    std::vector<double> s;
    std::vector<Vec4> position;
    std::vector<Frame4> frame;
    std::vector<double> k1, k2, k3;

    std::size_t size() const { return s.size(); }
};

/// Synthesize a framed curve from prescribed curvatures: classical RK4 with
/// fixed step on the 20-real state (position, T, N, B1, B2), gamma' = T.
FramedCurve integrate_curve(FrameKind kind, const Curvatures& k, const Frame4& f0, Vec4 p0,
                            double s0, double s1, double ds, bool project_steps = false);

enum class GaugePolicy { ReferenceFrame, FirstComponentUnit };

struct ExtractOptions {
    GaugePolicy gauge = GaugePolicy::ReferenceFrame;
    /// Constant gauge seed (scales of null directions are matched against it).
    std::optional<Frame4> reference;
    /// Per-sample gauge references; takes precedence over `reference`.
    const FramedCurve* reference_curve = nullptr;
    bool require_unit_speed = true;
    double unit_speed_tol = 1e-6;
    double degeneracy_threshold = 1e-9;
};

/// Recover frames and curvatures from position samples by repeated
/// differentiation with respect to measured arclength. ds is the parameter
/// step of the samples; unless require_unit_speed is disabled the
/// parametrization must be unit-speed within unit_speed_tol.
FramedCurve extract_frames(std::span<const Vec4> positions, double s0, double ds, FrameKind kind,
                           const ExtractOptions& opts = {});

///// Null partner of the null vector n: the unique null b with <n,b> = 1 and
/// <b,q> = 0 for every q in ortho (unit spacelike vectors orthogonal to n).
Vec4 null_partner(Vec4 n, std::span<const Vec4> ortho);

/// Unit spacelike vector orthogonal (in the pairing sense) to the unit
/// tangent T and the null normal N of a pseudo null frame, chosen as close to
/// `candidate` as the constraints allow. Completes the frame when k2 vanishes.
Vec4 unit_spacelike_completion(Vec4 candidate, const Vec4& T, const Vec4& N);

}  // namespace nullflow
