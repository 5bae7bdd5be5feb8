#pragma once

#include "fredholm/density_estimation.hpp"
#include "fredholm/kernel_models.hpp"
#include "fredholm/types.hpp"

#include <span>
#include <vector>

namespace fredholm {

/// Integrated squared error by trapezoid quadrature on a shared grid.
double ise(const DensityOnGrid& estimate, const DensityOnGrid& truth);

/// Mean over replicates of (truth - estimate_r)^2 at one point.
double pointwise_mse(std::span<const double> replicate_estimates, double truth_value);

/// Wasserstein-1 distance between two empirical measures on the line:
/// integral over t in (0, 1) of |F_a^{-1}(t) - F_b^{-1}(t)|. Equal sizes
/// reduce to the mean absolute difference of the sorted samples.
double wasserstein1_1d(std::span<const double> sample_a, std::span<const double> sample_b);

/// mu_rec(y) = (1/N) sum_k k(X_k, y) on the nodes of `y_grid`.
DensityOnGrid reconvolve(const ParticleCloud& cloud, const KernelModel& kernel,
                         const EvaluationGrid& y_grid, std::size_t workers = 1);

/// mu_rec(y) = integral k(x, y) pihat(x) dx by trapezoid quadrature over the
/// estimate's grid.
DensityOnGrid reconvolve(const DensityOnGrid& estimate, const KernelModel& kernel,
                         const EvaluationGrid& y_grid, std::size_t workers = 1);

}  // namespace fredholm
