#pragma once

#include <span>
#include <vector>

#include "nullflow/minkowski.hpp"

namespace nullflow {

/// Fourth-order first derivative of uniformly sampled data (5-point stencils,
/// one-sided near the ends). Requires at least 5 samples.
std::vector<double> derivative_samples(std::span<const double> f, double h);
std::vector<Vec4> derivative_samples(std::span<const Vec4> f, double h);

/// Same stencil evaluated at a single index.
double derivative_at(std::span<const double> f, std::size_t i, double h);
Vec4 derivative_at(std::span<const Vec4> f, std::size_t i, double h);

/// Cumulative integral F with F[0] = 0 over a uniform grid, built from
/// quadratic panels; pairs of panels reproduce composite Simpson sums and the
/// result is exact for quadratics. Requires at least 2 samples.
std::vector<double> cumulative_integral(std::span<const double> f, double h);

}  // namespace nullflow
