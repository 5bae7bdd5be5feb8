#pragma once

#include "fredholm/functional.hpp"
#include "fredholm/kernel_models.hpp"
#include "fredholm/reference_measure.hpp"
#include "fredholm/types.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace fredholm {

enum class ResamplePolicy {
    /// m distinct observations per step (experimental practice).
    without_replacement,
    /// m i.i.d. draws from the empirical measure of the sample.
    iid,
};

/// All knobs of the interacting-particle solver.
struct SolverConfig {
    double alpha = 1e-2;
    double eta = 0.0;
    double gamma = 1e-3;
    std::size_t n_particles = 200;
    std::size_t minibatch = 200;
    std::size_t max_steps = 100;
    std::uint64_t seed = 0;
    bool resample_each_step = true;
    ResamplePolicy resample_policy = ResamplePolicy::without_replacement;
    bool early_stop = false;
    double stop_tol = 1e-4;
    std::size_t stop_window = 10;
    double denom_floor = kDefaultDenomFloor;
    /// Evaluate the functional every this many steps; 0 disables it.
    std::size_t monitor_every = 1;
    /// Threads for the per-step drift; results do not depend on it.
    std::size_t threads = 1;

    /// Throws InputError on out-of-range values. `sample_size` is M.
    void validate(std::size_t sample_size) const;
};

/// How the initial cloud is drawn.
struct InitSpec {
    enum class Kind { observations, reference, point, uniform_box };
    Kind kind = Kind::observations;
    /// Added to every observation when kind == observations.
    std::vector<double> shift;
    /// Location for kind == point.
    std::vector<double> point;
    /// Box for kind == uniform_box.
    std::vector<double> lo;
    std::vector<double> hi;
};

/// One monitored step of the run.
struct StepRecord {
    std::size_t step = 0;
    /// Absent when monitoring was skipped or the KDE was degenerate.
    std::optional<FunctionalEstimate> estimate;
    double drift_mean = 0.0;
    double drift_max = 0.0;
    std::vector<double> mean;
    std::vector<double> variance;
};

struct SolverTrace {
    std::vector<StepRecord> records;
    bool stopped_early = false;
};

struct SolverResult {
    ParticleCloud cloud;
    SolverTrace trace;
};

/// Empirical drift and the mean-kernel values it was built from.
struct DriftEvaluation {
    Matrix drift;
    /// (1/N) sum_l k(X_l, y_j) for every batch point j.
    std::vector<double> mean_kernel;
    bool floored = false;
};

/// Row k: (1/m) sum_j grad_x k(X_k, y_j) / max(lambda[k(., y_j)] + eta, floor) - alpha grad U(X_k).
/// Sums are taken in pairwise order so the result is independent of `threads`.
DriftEvaluation drift_empirical(const ParticleCloud& cloud, const ObservationSample& batch,
                                const KernelModel& kernel, const ReferenceMeasure& ref,
                                double alpha, double eta, double denom_floor = kDefaultDenomFloor,
                                std::size_t threads = 1);

/// X + gamma b / (1 + gamma |b|) + sqrt(2 alpha gamma) Z, row by row.
ParticleCloud tamed_step(const ParticleCloud& cloud, const Matrix& drift, double gamma,
                         double alpha, const Matrix& noise);

/// Standard Gaussian N x d matrix; row k comes from the stream (seed, noise, step, k).
Matrix standard_noise(std::uint64_t seed, std::size_t step, std::size_t n, std::size_t d);

/// Full sample when m >= M, otherwise m rows chosen per `policy` from the
/// stream (seed, minibatch, step).
ObservationSample draw_minibatch(const ObservationSample& full, std::size_t m, std::uint64_t seed,
                                 std::size_t step,
                                 ResamplePolicy policy = ResamplePolicy::without_replacement);

ParticleCloud initialize(const InitSpec& spec, std::size_t n, std::uint64_t seed,
                         const ObservationSample& observations, const ReferenceMeasure& ref);

/// Called after each record is produced, with the cloud the record describes.
using StepObserver = std::function<void(const StepRecord&, const ParticleCloud&)>;

/// Runs the tamed particle scheme for up to `max_steps` steps. Bit-reproducible
/// for fixed (config.seed, inputs). Numerical failures carry the step index.
SolverResult run(const SolverConfig& config, const KernelModel& kernel,
                 const ReferenceMeasure& ref, const ParticleCloud& init,
                 const ObservationSample& observations, const StepObserver& observer = {});

}  // namespace fredholm
