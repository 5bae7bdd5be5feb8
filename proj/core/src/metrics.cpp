#include "fredholm/metrics.hpp"

#include "fredholm/errors.hpp"
#include "fredholm/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fredholm {

double ise(const DensityOnGrid& estimate, const DensityOnGrid& truth) {
    if (!(estimate.grid == truth.grid)) throw InputError("ise: grids differ");
    if (estimate.values.size() != truth.values.size()) throw InputError("ise: value counts differ");
    std::vector<double> sq(truth.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double r = truth.values[i] - estimate.values[i];
        sq[i] = r * r;
    }
    return truth.grid.integrate(sq);
}

double pointwise_mse(std::span<const double> replicate_estimates, double truth_value) {
    if (replicate_estimates.size() < 2) throw InputError("pointwise mse needs at least two replicates");
    double s = 0.0;
    for (double v : replicate_estimates) s += (truth_value - v) * (truth_value - v);
    return s / static_cast<double>(replicate_estimates.size());
}

double wasserstein1_1d(std::span<const double> sample_a, std::span<const double> sample_b) {
    if (sample_a.empty() || sample_b.empty()) throw InputError("wasserstein1: empty sample");
    std::vector<double> a(sample_a.begin(), sample_a.end());
    std::vector<double> b(sample_b.begin(), sample_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    if (a.size() == b.size()) {
        std::vector<double> diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = std::abs(a[i] - b[i]);
        return pairwise_sum(diff) / static_cast<double>(a.size());
    }

    // Merge the quantile breakpoints i/na and j/nb; both quantile functions
    // are constant between consecutive breakpoints.
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double t = 0.0, total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double next_a = static_cast<double>(i + 1) / na;
        const double next_b = static_cast<double>(j + 1) / nb;
        const double next = std::min(next_a, next_b);
        total += (next - t) * std::abs(a[i] - b[j]);
        t = next;
        if (next_a <= next) ++i;
        if (next_b <= next) ++j;
    }
    return total;
}

DensityOnGrid reconvolve(const ParticleCloud& cloud, const KernelModel& kernel,
                         const EvaluationGrid& y_grid, std::size_t workers) {
    if (y_grid.dim() != kernel.dim_y()) throw InputError("reconvolve: grid dimension differs from p");
    const Matrix nodes = y_grid.nodes();
    std::vector<double> values(y_grid.size());
    parallel_for(values.size(), workers, [&](std::size_t j) {
        std::vector<double> column(static_cast<std::size_t>(cloud.size()));
        kernel.eval_cols(cloud.points, row_of(nodes, static_cast<Eigen::Index>(j)), column);
        values[j] = pairwise_sum(column) / static_cast<double>(column.size());
    });
    return {y_grid, std::move(values)};
}

DensityOnGrid reconvolve(const DensityOnGrid& estimate, const KernelModel& kernel,
                         const EvaluationGrid& y_grid, std::size_t workers) {
    if (y_grid.dim() != kernel.dim_y()) throw InputError("reconvolve: grid dimension differs from p");
    if (estimate.grid.dim() != kernel.dim_x()) throw InputError("reconvolve: estimate dimension differs from d");
    const Matrix x_nodes = estimate.grid.nodes();
    const Matrix y_nodes = y_grid.nodes();
    std::vector<double> values(y_grid.size());
    parallel_for(values.size(), workers, [&](std::size_t j) {
        std::vector<double> integrand(estimate.values.size());
        kernel.eval_cols(x_nodes, row_of(y_nodes, static_cast<Eigen::Index>(j)), integrand);
        for (std::size_t i = 0; i < integrand.size(); ++i) integrand[i] *= estimate.values[i];
        values[j] = estimate.grid.integrate(integrand);
    });
    return {y_grid, std::move(values)};
}

}  // namespace fredholm
