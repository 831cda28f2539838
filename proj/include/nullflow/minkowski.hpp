#pragma once

#include <cmath>
#include <string>

namespace nullflow {

/// Vector in E_1^4 with signature (-,+,+,+); x1 is the timelike component.
struct Vec4 {
    double x1 = 0.0;
    double x2 = 0.0;
    double x3 = 0.0;
    double x4 = 0.0;

    constexpr double& operator[](int i) { return i == 0 ? x1 : i == 1 ? x2 : i == 2 ? x3 : x4; }
    constexpr double operator[](int i) const { return i == 0 ? x1 : i == 1 ? x2 : i == 2 ? x3 : x4; }

    friend constexpr Vec4 operator+(Vec4 a, Vec4 b) {
        return {a.x1 + b.x1, a.x2 + b.x2, a.x3 + b.x3, a.x4 + b.x4};
    }
    friend constexpr Vec4 operator-(Vec4 a, Vec4 b) {
        return {a.x1 - b.x1, a.x2 - b.x2, a.x3 - b.x3, a.x4 - b.x4};
    }
    friend constexpr Vec4 operator-(Vec4 a) { return {-a.x1, -a.x2, -a.x3, -a.x4}; }
    friend constexpr Vec4 operator*(double c, Vec4 a) {
        return {c * a.x1, c * a.x2, c * a.x3, c * a.x4};
    }
    friend constexpr Vec4 operator*(Vec4 a, double c) { return c * a; }
    friend constexpr Vec4 operator/(Vec4 a, double c) { return (1.0 / c) * a; }
    constexpr Vec4& operator+=(Vec4 b) { return *this = *this + b; }
    constexpr Vec4& operator-=(Vec4 b) { return *this = *this - b; }
    constexpr Vec4& operator*=(double c) { return *this = c * *this; }
    friend constexpr bool operator==(Vec4 a, Vec4 b) {
        return a.x1 == b.x1 && a.x2 == b.x2 && a.x3 == b.x3 && a.x4 == b.x4;
    }
};

/// Lorentzian inner product <a,b> = -a1 b1 + a2 b2 + a3 b3 + a4 b4.
constexpr double dot(Vec4 a, Vec4 b) {
    return -a.x1 * b.x1 + a.x2 * b.x2 + a.x3 * b.x3 + a.x4 * b.x4;
}

/// Euclidean squared magnitude, used only for scale-relative tolerances.
constexpr double component_norm_sq(Vec4 a) {
    return a.x1 * a.x1 + a.x2 * a.x2 + a.x3 * a.x3 + a.x4 * a.x4;
}

/// sqrt(|<v,v>|): the causal norm regardless of sign.
inline double norm(Vec4 v) { return std::sqrt(std::fabs(dot(v, v))); }

enum class CausalClass { Spacelike, Timelike, Null, Zero };

/// Classify v by the sign of <v,v> with a band around zero that scales with
/// the component magnitude: |<v,v>| <= tol * max(1, sum x_i^2) reads as null.
/// The exact zero vector is its own class.
constexpr CausalClass classify(Vec4 v, double tol = 1e-9) {
    if (v.x1 == 0.0 && v.x2 == 0.0 && v.x3 == 0.0 && v.x4 == 0.0) return CausalClass::Zero;
    const double q = dot(v, v);
    const double scale = component_norm_sq(v);
    const double band = tol * (scale > 1.0 ? scale : 1.0);
    if (q > band) return CausalClass::Spacelike;
    if (q < -band) return CausalClass::Timelike;
    return CausalClass::Null;
}

inline bool all_finite(Vec4 v) {
    return std::isfinite(v.x1) && std::isfinite(v.x2) && std::isfinite(v.x3) && std::isfinite(v.x4);
}

inline std::string to_string(CausalClass c) {
    switch (c) {
        case CausalClass::Spacelike: return "spacelike";
        case CausalClass::Timelike: return "timelike";
        case CausalClass::Null: return "null";
        case CausalClass::Zero: return "zero";
    }
    return "?";
}

inline std::string to_string(Vec4 v) {
    return "(" + std::to_string(v.x1) + ", " + std::to_string(v.x2) + ", " + std::to_string(v.x3) +
           ", " + std::to_string(v.x4) + ")";
}

}  // namespace nullflow
