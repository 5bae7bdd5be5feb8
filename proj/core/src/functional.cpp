#include "fredholm/functional.hpp"

#include "fredholm/errors.hpp"
#include "fredholm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fredholm {

double data_term_from_mean_kernel(std::span<const double> mean_kernel, double eta,
                                  double denom_floor, bool& floored) {
    if (mean_kernel.empty()) throw InputError("functional: no observations");
    std::vector<double> logs(mean_kernel.size());
    for (std::size_t j = 0; j < mean_kernel.size(); ++j) {
        double denom = mean_kernel[j] + eta;
        if (denom < denom_floor) {
            denom = denom_floor;
            floored = true;
        }
        logs[j] = std::log(denom);
    }
    return -pairwise_sum(logs) / static_cast<double>(mean_kernel.size());
}

double kl_term(const ParticleCloud& cloud, const ReferenceMeasure& ref, double alpha,
               const KernelDensity& density, std::size_t workers) {
    if (alpha == 0.0) return 0.0;
    if (ref.kind() == ReferenceMeasure::Kind::flat) {
        throw UnsupportedOperation("KL term needs a normalisable reference measure");
    }
    const auto n = static_cast<std::size_t>(cloud.size());
    const std::vector<double> pihat = density.eval_many(cloud.points, workers);
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Point x = row_of(cloud.points, static_cast<Eigen::Index>(k));
        terms[k] = std::log(pihat[k]) - ref.log_density(x);
    }
    return alpha * pairwise_sum(terms) / static_cast<double>(n);
}

FunctionalEstimate g_hat(const ParticleCloud& cloud, const ObservationSample& observations,
                         const KernelModel& kernel, const ReferenceMeasure& ref, double alpha,
                         double eta, const KernelDensity& density, double denom_floor,
                         std::size_t workers) {
    validate(cloud);
    validate(observations);
    if (static_cast<std::size_t>(cloud.dim()) != kernel.dim_x() ||
        static_cast<std::size_t>(observations.dim()) != kernel.dim_y()) {
        throw InputError("functional: dimensions do not match the kernel");
    }
    const auto m = static_cast<std::size_t>(observations.size());
    std::vector<double> mean_kernel(m);
    parallel_for(m, workers, [&](std::size_t j) {
        std::vector<double> column(static_cast<std::size_t>(cloud.size()));
        kernel.eval_cols(cloud.points, row_of(observations.points, static_cast<Eigen::Index>(j)), column);
        mean_kernel[j] = pairwise_sum(column) / static_cast<double>(column.size());
    });

    FunctionalEstimate est;
    est.data_term = data_term_from_mean_kernel(mean_kernel, eta, denom_floor, est.floored);
    est.kl_term = kl_term(cloud, ref, alpha, density, workers);
    est.total = est.data_term + est.kl_term;
    return est;
}

}  // namespace fredholm
