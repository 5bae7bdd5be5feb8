#include "fredholm/crossval.hpp"

#include "fredholm/density_estimation.hpp"
#include "fredholm/errors.hpp"
#include "fredholm/functional.hpp"
#include "fredholm/parallel.hpp"
#include "fredholm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fredholm {

void CvPlan::validate(std::size_t sample_size) const {
    if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
    if (alpha_grid.empty()) throw InputError("alpha grid is empty");
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
        if (!(alpha_grid[i] > 0.0) || !std::isfinite(alpha_grid[i])) {
            throw InputError("alpha grid entries must be positive");
        }
        if (i > 0 && !(alpha_grid[i] > alpha_grid[i - 1])) {
            throw InputError("alpha grid must be strictly increasing");
        }
    }
    if (sample_size < folds) throw InputError("fewer observations than folds");
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t sample_size, std::size_t folds,
                                                 std::uint64_t seed) {
    if (folds < 1 || sample_size < folds) throw InputError("cannot split sample into that many folds");
    std::vector<std::size_t> order(sample_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    KeyedStream rng(seed, StreamRole::folds, 0, 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> out(folds);
    for (std::size_t i = 0; i < sample_size; ++i) out[i % folds].push_back(order[i]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

namespace {

ObservationSample take_rows(const ObservationSample& full, const std::vector<std::size_t>& rows) {
    ObservationSample out{Matrix(static_cast<Eigen::Index>(rows.size()), full.dim())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.points.row(static_cast<Eigen::Index>(i)) = full.points.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& fold) {
    std::vector<bool> held(n, false);
    for (std::size_t i : fold) held[i] = true;
    std::vector<std::size_t> out;
    out.reserve(n - fold.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!held[i]) out.push_back(i);
    }
    return out;
}

}  // namespace

CvResult cv_score(const CvPlan& plan, const CvProblem& problem, const ObservationSample& observations,
                  std::size_t workers) {
    plan.validate(static_cast<std::size_t>(observations.size()));
    return cv_score_with_folds(plan, make_folds(static_cast<std::size_t>(observations.size()), plan.folds, plan.seed),
                               problem, observations, workers);
}

CvResult cv_score_with_folds(const CvPlan& plan, const std::vector<std::vector<std::size_t>>& folds,
                             const CvProblem& problem, const ObservationSample& observations,
                             std::size_t workers) {
    validate(observations);
    const auto n_obs = static_cast<std::size_t>(observations.size());
    plan.validate(n_obs);
    if (folds.size() < 2) throw InputError("cross-validation needs at least 2 folds");
    if (problem.kernel == nullptr || problem.ref == nullptr) throw InputError("cross-validation problem is incomplete");
    std::vector<bool> seen(n_obs, false);
    for (const auto& f : folds) {
        if (f.empty()) throw InputError("empty fold");
        for (std::size_t i : f) {
            if (i >= n_obs || seen[i]) throw InputError("folds are not disjoint subsets of the sample");
            seen[i] = true;
        }
    }

    const std::size_t n_alpha = plan.alpha_grid.size();
    CvResult result;
    result.cells.resize(n_alpha * folds.size());
    parallel_for(result.cells.size(), workers, [&](std::size_t cell) {
        const std::size_t a = cell / folds.size();
        const std::size_t f = cell % folds.size();
        CvCell& out = result.cells[cell];
        out.alpha = plan.alpha_grid[a];
        out.fold = f;
        try {
            const ObservationSample train = take_rows(observations, complement(n_obs, folds[f]));
            const ObservationSample test = take_rows(observations, folds[f]);
            SolverConfig cfg = problem.solver;
            cfg.alpha = out.alpha;
            cfg.threads = 1;
            const ParticleCloud init = initialize(problem.init, cfg.n_particles, cfg.seed, train, *problem.ref);
            const SolverResult fit = run(cfg, *problem.kernel, *problem.ref, init, train);
            const KernelDensity density(fit.cloud);
            const FunctionalEstimate est = g_hat(fit.cloud, test, *problem.kernel, *problem.ref, cfg.alpha,
                                                 cfg.eta, density, cfg.denom_floor);
            const double score = plan.data_term_only ? est.data_term : est.total;
            if (!std::isfinite(score)) throw NumericalFailure("non-finite validation score");
            out.g_hat = score;
            out.status = est.floored ? "floored" : "ok";
        } catch (const NumericalFailure& e) {
            out.status = std::string("failed: ") + e.what();
        } catch (const InputError& e) {
            out.status = std::string("failed: ") + e.what();
        }
    });

    double best = 0.0;
    for (std::size_t a = 0; a < n_alpha; ++a) {
        CvSummary s;
        s.alpha = plan.alpha_grid[a];
        std::vector<double> scores;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const auto& c = result.cells[a * folds.size() + f];
            if (c.g_hat) scores.push_back(*c.g_hat);
        }
        s.folds_ok = scores.size();
        if (!scores.empty()) {
            s.mean_g_hat = pairwise_sum(scores) / static_cast<double>(scores.size());
            if (!result.best_alpha || *s.mean_g_hat < best) {
                best = *s.mean_g_hat;
                result.best_alpha = s.alpha;
            }
        }
        result.summary.push_back(s);
    }
    return result;
}

}  // namespace fredholm
