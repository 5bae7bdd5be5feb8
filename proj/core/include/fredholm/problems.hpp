#pragma once

#include "fredholm/baselines.hpp"
#include "fredholm/density_estimation.hpp"
#include "fredholm/kernel_models.hpp"
#include "fredholm/particle_solver.hpp"
#include "fredholm/reference_measure.hpp"
#include "fredholm/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fredholm {

/// A complete synthetic experiment: kernel, closed-form truth, observation
/// sampler, reference rule and solver defaults.
struct ExperimentPreset {
    std::string name;
    std::shared_ptr<const KernelModel> kernel;

    /// Density of the solution pi on R^d (always set).
    DensityFunction truth;
    /// Density of the first coordinate of pi.
    std::function<double(double)> truth_marginal1;
    /// Density of the data measure mu on R^p; empty when not available.
    DensityFunction mu_density;

    std::function<Matrix(std::size_t n, std::uint64_t seed)> sample_truth;
    std::function<ObservationSample(std::size_t m, std::uint64_t seed)> sample_observations;
    std::function<ReferenceMeasure(const ObservationSample&)> reference;

    InitSpec init;
    SolverConfig solver;
    std::size_t default_observations = 1000;

    /// Grid for density metrics on x (only for d <= 2).
    std::optional<EvaluationGrid> metric_grid;
    /// Grid on y for reconvolution checks (only for p <= 2).
    std::optional<EvaluationGrid> observation_grid;
};

/// pi = (1/3) N(0.3, 0.015^2) + (2/3) N(0.5, 0.043^2), k = N(y; x, 0.045^2).
ExperimentPreset preset_gaussian_mixture_1d();

/// pi = N(0, 0.43^2), k = N(y; x, 0.45^2), pi0 = N(0, sample variance of mu).
ExperimentPreset preset_toy_gaussian();

/// pi = (1/3) N(0.3 1, 0.07^2 I) + (2/3) N(0.7 1, 0.1^2 I), k = N(y; x, 0.15^2 I),
/// pi0 = N(0.5 1, 0.25^2 I).
ExperimentPreset preset_highdim_mixture(std::size_t dim);

/// Slow-decay incidence curve on [0, 100] with the two-component delay kernel;
/// the misspecified variant records part of the day-6/7 cases two days late.
ExperimentPreset preset_epidemiology_synthetic(bool misspecified);

/// Two axis-aligned Gaussian blobs observed through the Radon alignment kernel.
ExperimentPreset preset_ct_phantom();

/// Looks a preset up by name; `dim` is used by highdim_mixture only.
ExperimentPreset preset_by_name(const std::string& name, std::size_t dim = 2, bool misspecified = false);

std::vector<std::string> preset_names();

/// Unnormalised incidence profile exp(-0.05 (8 - x)^2) on [0, 8],
/// exp(-0.001 (x - 8)^2) on [8, 100], zero elsewhere.
double incidence_profile(double x);

/// Moves a U(0.3, 0.5) fraction of the observations recorded on every sixth and
/// seventh day (floor(y) mod 7 in {6, 0}, y >= 1) two days later.
void apply_reporting_delay(ObservationSample& observations, std::uint64_t seed);

}  // namespace fredholm
