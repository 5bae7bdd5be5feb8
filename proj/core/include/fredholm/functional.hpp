#pragma once

#include "fredholm/density_estimation.hpp"
#include "fredholm/kernel_models.hpp"
#include "fredholm/reference_measure.hpp"
#include "fredholm/types.hpp"

#include <span>

namespace fredholm {

/// Monte Carlo estimate of the regularised objective
///   -(1/M) sum_j log((1/N) sum_k k(X_k, y_j) + eta)
///   + (alpha/N) sum_k [log pihat(X_k) - log pi0(X_k)].
struct FunctionalEstimate {
    double data_term = 0.0;
    double kl_term = 0.0;
    double total = 0.0;
    /// True when some mean-kernel value fell below the denominator floor.
    bool floored = false;
};

inline constexpr double kDefaultDenomFloor = 1e-30;

FunctionalEstimate g_hat(const ParticleCloud& cloud, const ObservationSample& observations,
                         const KernelModel& kernel, const ReferenceMeasure& ref, double alpha,
                         double eta, const KernelDensity& density,
                         double denom_floor = kDefaultDenomFloor, std::size_t workers = 1);

/// Data term only, from precomputed mean-kernel values (1/N) sum_k k(X_k, y_j).
/// Sets `floored` when any value needed the floor.
double data_term_from_mean_kernel(std::span<const double> mean_kernel, double eta,
                                  double denom_floor, bool& floored);

/// (alpha/N) sum_k [log pihat(X_k) - log pi0(X_k)]; exactly 0 when alpha == 0.
double kl_term(const ParticleCloud& cloud, const ReferenceMeasure& ref, double alpha,
               const KernelDensity& density, std::size_t workers = 1);

}  // namespace fredholm
