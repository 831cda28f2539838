#include "nullflow/stencils.hpp"

#include <cstddef>

#include "nullflow/errors.hpp"

namespace nullflow {
namespace {

// 5-point, 4th-order first-derivative weights over 12h. Rows: offset of the
// evaluation point inside the window (0 and 1 left edge, 2 centered, 3 and 4
// right edge).
constexpr double kWeights[5][5] = {
    {-25.0, 48.0, -36.0, 16.0, -3.0},
    {-3.0, -10.0, 18.0, -6.0, 1.0},
    {1.0, -8.0, 0.0, 8.0, -1.0},
    {-1.0, 6.0, -18.0, 10.0, 3.0},
    {3.0, -16.0, 36.0, -48.0, 25.0},
};

// Window start and row selection for index i in a grid of n samples.
inline void stencil_row(std::size_t n, std::size_t i, std::size_t& start, std::size_t& row) {
    if (i < 2) {
        start = 0;
        row = i;
    } else if (i + 2 >= n) {
        start = n - 5;
        row = 5 - (n - i);
    } else {
        start = i - 2;
        row = 2;
    }
}

template <class T>
T derivative_at_impl(std::span<const T> f, std::size_t i, double h) {
    if (f.size() < 5) throw DegeneracyError("boundary stencil underflow: need at least 5 samples");
    std::size_t start = 0, row = 0;
    stencil_row(f.size(), i, start, row);
    T acc = kWeights[row][0] * f[start];
    for (std::size_t k = 1; k < 5; ++k) acc += kWeights[row][k] * f[start + k];
    return (1.0 / (12.0 * h)) * acc;
}

template <class T>
std::vector<T> derivative_samples_impl(std::span<const T> f, double h) {
    std::vector<T> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = derivative_at_impl(f, i, h);
    return out;
}

}  // namespace

std::vector<double> derivative_samples(std::span<const double> f, double h) {
    return derivative_samples_impl(f, h);
}

std::vector<Vec4> derivative_samples(std::span<const Vec4> f, double h) {
    return derivative_samples_impl(f, h);
}

double derivative_at(std::span<const double> f, std::size_t i, double h) {
    return derivative_at_impl(f, i, h);
}

Vec4 derivative_at(std::span<const Vec4> f, std::size_t i, double h) {
    return derivative_at_impl(f, i, h);
}

std::vector<double> cumulative_integral(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    if (n < 2) throw DegeneracyError("cumulative integral needs at least 2 samples");
    std::vector<double> s(n, 0.0);
    if (n == 2) {
        s[1] = 0.5 * h * (f[0] + f[1]);
        return s;
    }
    // Quadratic panels: a pair of adjacent panels sums to a Simpson step, and
    // every increment is exact for quadratic integrands.
    for (std::size_t p = 0; p + 1 < n; ++p) {
        double inc;
        if (p % 2 == 1 || p + 2 >= n) {
            inc = h / 12.0 * (-f[p - 1] + 8.0 * f[p] + 5.0 * f[p + 1]);
        } else {
            inc = h / 12.0 * (5.0 * f[p] + 8.0 * f[p + 1] - f[p + 2]);
        }
        s[p + 1] = s[p] + inc;
    }
    return s;
}

}  // namespace nullflow
