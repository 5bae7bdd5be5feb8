#pragma once

#include "fredholm/kernel_models.hpp"
#include "fredholm/particle_solver.hpp"
#include "fredholm/reference_measure.hpp"
#include "fredholm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fredholm {

/// L-fold cross-validation plan over a grid of alpha values.
struct CvPlan {
    std::size_t folds = 5;
    std::vector<double> alpha_grid;
    std::uint64_t seed = 0;
    /// Score folds with the data term only instead of the full estimate.
    bool data_term_only = false;

    /// Throws InputError unless folds >= 2, the grid is strictly increasing
    /// and positive, and the sample has at least `folds` rows.
    void validate(std::size_t sample_size) const;
};

/// Seeded uniform partition of [0, sample_size) into `folds` near-equal
/// parts; indices inside each fold are sorted.
std::vector<std::vector<std::size_t>> make_folds(std::size_t sample_size, std::size_t folds,
                                                 std::uint64_t seed);

struct CvCell {
    double alpha = 0.0;
    std::size_t fold = 0;
    /// Absent when the fit failed; `status` then holds the reason.
    std::optional<double> g_hat;
    std::string status;
};

struct CvSummary {
    double alpha = 0.0;
    /// Mean over the folds that succeeded; absent when none did.
    std::optional<double> mean_g_hat;
    std::size_t folds_ok = 0;
};

struct CvResult {
    std::vector<CvCell> cells;
    std::vector<CvSummary> summary;
    /// Alpha with the smallest mean score; absent when every alpha failed.
    std::optional<double> best_alpha;
};

/// Everything the per-cell fit needs besides alpha and the fold.
struct CvProblem {
    const KernelModel* kernel = nullptr;
    const ReferenceMeasure* ref = nullptr;
    InitSpec init;
    /// Solver settings; alpha is replaced per cell.
    SolverConfig solver;
};

/// Fits on the complement of each fold and scores on the fold, for every
/// alpha. Cells run on `workers` threads; every cell uses solver.seed, so
/// all alphas see the same noise.
CvResult cv_score(const CvPlan& plan, const CvProblem& problem, const ObservationSample& observations,
                  std::size_t workers = 1);

/// As cv_score with an explicit partition (each fold nonempty, disjoint).
CvResult cv_score_with_folds(const CvPlan& plan, const std::vector<std::vector<std::size_t>>& folds,
                             const CvProblem& problem, const ObservationSample& observations,
                             std::size_t workers = 1);

}  // namespace fredholm
