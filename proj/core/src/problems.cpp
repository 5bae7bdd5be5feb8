#include "fredholm/problems.hpp"

#include "fredholm/errors.hpp"
#include "fredholm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace fredholm {

namespace {

double normal_pdf(double x, double mean, double var) {
    const double r = x - mean;
    return std::exp(-0.5 * r * r / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Isotropic two-component mixture in R^d with shared per-component variance.
struct IsoMixture {
    std::vector<double> weights;
    std::vector<double> centers;  // same location in every coordinate
    std::vector<double> variances;

    double density(Point x) const {
        double total = 0.0;
        for (std::size_t c = 0; c < weights.size(); ++c) {
            double p = weights[c];
            for (double xi : x) p *= normal_pdf(xi, centers[c], variances[c]);
            total += p;
        }
        return total;
    }

    double marginal(double x) const {
        double total = 0.0;
        for (std::size_t c = 0; c < weights.size(); ++c) total += weights[c] * normal_pdf(x, centers[c], variances[c]);
        return total;
    }

    /// Adds `extra_var` to every component: the convolution with N(0, extra_var I).
    IsoMixture convolved(double extra_var) const {
        IsoMixture out = *this;
        for (double& v : out.variances) v += extra_var;
        return out;
    }

    Matrix sample(std::size_t n, std::size_t dim, std::uint64_t seed, StreamRole role) const {
        Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < n; ++k) {
            KeyedStream rng(seed, role, 0, k);
            std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
            std::normal_distribution<double> normal;
            const std::size_t c = pick(rng);
            const double sd = std::sqrt(variances[c]);
            for (std::size_t i = 0; i < dim; ++i) {
                out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = centers[c] + sd * normal(rng);
            }
        }
        return out;
    }
};

ExperimentPreset mixture_preset(std::string name, const IsoMixture& truth, double noise_sd, std::size_t dim) {
    ExperimentPreset p;
    p.name = std::move(name);
    p.kernel = std::make_shared<GaussianConvolutionKernel>(std::vector<double>(dim, noise_sd));
    const IsoMixture mu = truth.convolved(noise_sd * noise_sd);
    p.truth = [truth](Point x) { return truth.density(x); };
    p.truth_marginal1 = [truth](double x) { return truth.marginal(x); };
    p.mu_density = [mu](Point y) { return mu.density(y); };
    p.sample_truth = [truth, dim](std::size_t n, std::uint64_t seed) {
        return truth.sample(n, dim, seed, StreamRole::truth);
    };
    p.sample_observations = [mu, dim](std::size_t m, std::uint64_t seed) {
        return ObservationSample{mu.sample(m, dim, seed, StreamRole::observations)};
    };
    return p;
}

}  // namespace

ExperimentPreset preset_gaussian_mixture_1d() {
    const IsoMixture truth{{1.0 / 3.0, 2.0 / 3.0}, {0.3, 0.5}, {0.015 * 0.015, 0.043 * 0.043}};
    ExperimentPreset p = mixture_preset("gaussian_mixture_1d", truth, 0.045, 1);
    p.reference = [](const ObservationSample& obs) { return ReferenceMeasure::from_sample(obs); };
    p.init.kind = InitSpec::Kind::observations;
    p.default_observations = 10000;
    p.solver.alpha = 1e-3;
    p.solver.gamma = 1e-3;
    p.solver.max_steps = 100;
    p.solver.n_particles = 200;
    p.solver.minibatch = 200;
    p.metric_grid = EvaluationGrid::cube(1, -0.2, 1.2, 1401);
    p.observation_grid = EvaluationGrid::cube(1, -0.4, 1.4, 1801);
    return p;
}

ExperimentPreset preset_toy_gaussian() {
    const double s_pi2 = 0.43 * 0.43;
    const IsoMixture truth{{1.0}, {0.0}, {s_pi2}};
    ExperimentPreset p = mixture_preset("toy_gaussian", truth, 0.45, 1);
    // Zero-mean reference with the sample variance of the observations.
    p.reference = [](const ObservationSample& obs) {
        const auto fitted = ReferenceMeasure::from_sample(obs);
        return ReferenceMeasure::gaussian({0.0}, fitted.variances());
    };
    p.init.kind = InitSpec::Kind::reference;
    p.default_observations = 10000;
    p.solver.alpha = 0.02;
    p.solver.gamma = 1e-2;
    p.solver.max_steps = 300;
    p.solver.n_particles = 500;
    p.solver.minibatch = 500;
    p.metric_grid = EvaluationGrid::cube(1, -4.0, 4.0, 1601);
    p.observation_grid = EvaluationGrid::cube(1, -5.0, 5.0, 2001);
    return p;
}

ExperimentPreset preset_highdim_mixture(std::size_t dim) {
    if (dim < 1) throw InputError("highdim mixture needs dim >= 1");
    const IsoMixture truth{{1.0 / 3.0, 2.0 / 3.0}, {0.3, 0.7}, {0.07 * 0.07, 0.1 * 0.1}};
    ExperimentPreset p = mixture_preset("highdim_mixture", truth, 0.15, dim);
    p.reference = [dim](const ObservationSample&) {
        return ReferenceMeasure::gaussian(std::vector<double>(dim, 0.5), std::vector<double>(dim, 0.25 * 0.25));
    };
    p.init.kind = InitSpec::Kind::reference;
    p.default_observations = 1000;
    p.solver.alpha = 0.01;
    p.solver.gamma = 1e-2;
    p.solver.max_steps = 50;
    p.solver.n_particles = 1000;
    p.solver.minibatch = 1000;
    if (dim <= 2) {
        p.metric_grid = EvaluationGrid::cube(dim, 0.0, 1.0, dim == 1 ? 1001 : 101);
        p.observation_grid = EvaluationGrid::cube(dim, -0.5, 1.5, dim == 1 ? 1001 : 101);
    }
    return p;
}

double incidence_profile(double x) {
    if (x < 0.0 || x > 100.0) return 0.0;
    if (x <= 8.0) return std::exp(-0.05 * (8.0 - x) * (8.0 - x));
    return std::exp(-0.001 * (x - 8.0) * (x - 8.0));
}

void apply_reporting_delay(ObservationSample& observations, std::uint64_t seed) {
    std::map<long, std::vector<Eigen::Index>> by_day;
    for (Eigen::Index j = 0; j < observations.size(); ++j) {
        const double y = observations.points(j, 0);
        if (y < 1.0) continue;
        const long day = static_cast<long>(std::floor(y));
        if (day % 7 == 6 || day % 7 == 0) by_day[day].push_back(j);
    }
    for (auto& [day, members] : by_day) {
        KeyedStream rng(seed, StreamRole::misc, static_cast<std::uint64_t>(day), 0);
        const double fraction = 0.3 + 0.2 * rng.uniform();
        std::shuffle(members.begin(), members.end(), rng);
        const auto moved = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < moved; ++i) observations.points(members[i], 0) += 2.0;
    }
}

ExperimentPreset preset_epidemiology_synthetic(bool misspecified) {
    // Normalised truth and its inverse CDF, tabulated on a fine grid.
    constexpr std::size_t kNodes = 100001;
    constexpr double kStep = 100.0 / static_cast<double>(kNodes - 1);
    auto cdf = std::make_shared<std::vector<double>>(kNodes, 0.0);
    for (std::size_t i = 1; i < kNodes; ++i) {
        const double a = incidence_profile(kStep * static_cast<double>(i - 1));
        const double b = incidence_profile(kStep * static_cast<double>(i));
        (*cdf)[i] = (*cdf)[i - 1] + 0.5 * kStep * (a + b);
    }
    const double mass = cdf->back();
    for (double& c : *cdf) c /= mass;

    auto kernel = std::make_shared<GaussianMixtureDelayKernel>(
        std::vector<double>{0.595, 0.405}, std::vector<double>{8.63, 15.24}, std::vector<double>{2.56, 5.39});

    ExperimentPreset p;
    p.name = misspecified ? "epidemiology_misspecified" : "epidemiology";
    p.kernel = kernel;
    p.truth = [mass](Point x) { return incidence_profile(x[0]) / mass; };
    p.truth_marginal1 = [mass](double x) { return incidence_profile(x) / mass; };

    auto inverse_cdf = [cdf](double u) {
        const auto it = std::lower_bound(cdf->begin(), cdf->end(), u);
        const auto i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cdf->begin(), 1, static_cast<std::ptrdiff_t>(kNodes - 1)));
        const double lo = (*cdf)[i - 1], hi = (*cdf)[i];
        const double t = hi > lo ? (u - lo) / (hi - lo) : 0.0;
        return kStep * (static_cast<double>(i - 1) + t);
    };
    p.sample_truth = [inverse_cdf](std::size_t n, std::uint64_t seed) {
        Matrix out(static_cast<Eigen::Index>(n), 1);
        for (std::size_t k = 0; k < n; ++k) {
            KeyedStream rng(seed, StreamRole::truth, 0, k);
            out(static_cast<Eigen::Index>(k), 0) = inverse_cdf(rng.uniform());
        }
        return out;
    };
    p.sample_observations = [inverse_cdf, kernel, misspecified](std::size_t m, std::uint64_t seed) {
        ObservationSample obs{Matrix(static_cast<Eigen::Index>(m), 1)};
        const auto& w = kernel->weights();
        for (std::size_t k = 0; k < m; ++k) {
            KeyedStream rng(seed, StreamRole::observations, 0, k);
            const double infection = inverse_cdf(rng.uniform());
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            std::normal_distribution<double> normal;
            const std::size_t c = pick(rng);
            obs.points(static_cast<Eigen::Index>(k), 0) = infection + kernel->means()[c] + kernel->sds()[c] * normal(rng);
        }
        if (misspecified) apply_reporting_delay(obs, seed);
        return obs;
    };
    p.mu_density = [kernel, mass](Point y) {
        constexpr std::size_t kQuad = 2001;
        constexpr double h = 100.0 / static_cast<double>(kQuad - 1);
        double total = 0.0;
        for (std::size_t i = 0; i < kQuad; ++i) {
            const double x = h * static_cast<double>(i);
            const double w = (i == 0 || i + 1 == kQuad) ? 0.5 * h : h;
            total += w * incidence_profile(x) / mass * kernel->eval(std::span<const double>(&x, 1), y);
        }
        return total;
    };
    p.reference = [](const ObservationSample& obs) { return ReferenceMeasure::from_sample(obs, {-9.0}); };
    p.init.kind = InitSpec::Kind::observations;
    p.init.shift = {-9.0};
    p.default_observations = 5000;
    p.solver.alpha = 1e-3;
    p.solver.gamma = 1e-1;
    p.solver.max_steps = 3000;
    p.solver.n_particles = 500;
    p.solver.minibatch = 500;
    p.metric_grid = EvaluationGrid::cube(1, 0.0, 100.0, 1001);
    p.observation_grid = EvaluationGrid::cube(1, -20.0, 160.0, 1801);
    return p;
}

ExperimentPreset preset_ct_phantom() {
    struct Blob {
        double weight;
        std::array<double, 2> mean;
        std::array<double, 2> sd;
    };
    const std::vector<Blob> blobs{{0.5, {-0.3, -0.1}, {0.12, 0.2}}, {0.5, {0.35, 0.25}, {0.18, 0.1}}};
    constexpr double kAlignmentSd = 0.05;
    auto kernel = std::make_shared<RadonAlignmentKernel>(kAlignmentSd);

    ExperimentPreset p;
    p.name = "ct_phantom";
    p.kernel = kernel;
    p.truth = [blobs](Point x) {
        double total = 0.0;
        for (const auto& b : blobs) {
            total += b.weight * normal_pdf(x[0], b.mean[0], b.sd[0] * b.sd[0]) *
                     normal_pdf(x[1], b.mean[1], b.sd[1] * b.sd[1]);
        }
        return total;
    };
    p.truth_marginal1 = [blobs](double x) {
        double total = 0.0;
        for (const auto& b : blobs) total += b.weight * normal_pdf(x, b.mean[0], b.sd[0] * b.sd[0]);
        return total;
    };
    // The projection of a Gaussian blob onto direction (cos phi, sin phi) is Gaussian.
    p.mu_density = [blobs](Point y) {
        const double c = std::cos(y[0]), s = std::sin(y[0]);
        double total = 0.0;
        for (const auto& b : blobs) {
            const double centre = b.mean[0] * c + b.mean[1] * s;
            const double var = c * c * b.sd[0] * b.sd[0] + s * s * b.sd[1] * b.sd[1] + kAlignmentSd * kAlignmentSd;
            total += b.weight * normal_pdf(y[1], centre, var);
        }
        return total / (2.0 * std::numbers::pi);
    };
    auto draw_blob_point = [blobs](KeyedStream& rng, double& x0, double& x1) {
        std::discrete_distribution<std::size_t> pick({blobs[0].weight, blobs[1].weight});
        std::normal_distribution<double> normal;
        const auto& b = blobs[pick(rng)];
        x0 = b.mean[0] + b.sd[0] * normal(rng);
        x1 = b.mean[1] + b.sd[1] * normal(rng);
    };
    p.sample_truth = [draw_blob_point](std::size_t n, std::uint64_t seed) {
        Matrix out(static_cast<Eigen::Index>(n), 2);
        for (std::size_t k = 0; k < n; ++k) {
            KeyedStream rng(seed, StreamRole::truth, 0, k);
            draw_blob_point(rng, out(static_cast<Eigen::Index>(k), 0), out(static_cast<Eigen::Index>(k), 1));
        }
        return out;
    };
    p.sample_observations = [draw_blob_point](std::size_t m, std::uint64_t seed) {
        ObservationSample obs{Matrix(static_cast<Eigen::Index>(m), 2)};
        for (std::size_t k = 0; k < m; ++k) {
            KeyedStream rng(seed, StreamRole::observations, 0, k);
            double x0, x1;
            draw_blob_point(rng, x0, x1);
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            std::normal_distribution<double> normal;
            obs.points(static_cast<Eigen::Index>(k), 0) = phi;
            obs.points(static_cast<Eigen::Index>(k), 1) = x0 * std::cos(phi) + x1 * std::sin(phi) + kAlignmentSd * normal(rng);
        }
        return obs;
    };
    p.reference = [](const ObservationSample&) { return ReferenceMeasure::gaussian({0.0, 0.0}, {0.35 * 0.35, 0.35 * 0.35}); };
    p.init.kind = InitSpec::Kind::reference;
    p.default_observations = 5000;
    p.solver.alpha = 7e-3;
    p.solver.gamma = 1e-3;
    p.solver.max_steps = 200;
    p.solver.n_particles = 1000;
    p.solver.minibatch = 1000;
    p.metric_grid = EvaluationGrid::cube(2, -1.5, 1.5, 121);
    p.observation_grid = EvaluationGrid({{0.0, 2.0 * std::numbers::pi, 129}, {-1.5, 1.5, 121}});
    return p;
}

std::vector<std::string> preset_names() {
    return {"gaussian_mixture_1d", "toy_gaussian", "highdim_mixture", "epidemiology",
            "epidemiology_misspecified", "ct_phantom"};
}

ExperimentPreset preset_by_name(const std::string& name, std::size_t dim, bool misspecified) {
    if (name == "gaussian_mixture_1d") return preset_gaussian_mixture_1d();
    if (name == "toy_gaussian") return preset_toy_gaussian();
    if (name == "highdim_mixture") return preset_highdim_mixture(dim);
    if (name == "epidemiology") return preset_epidemiology_synthetic(misspecified);
    if (name == "epidemiology_misspecified") return preset_epidemiology_synthetic(true);
    if (name == "ct_phantom") return preset_ct_phantom();
    throw InputError("unknown preset '" + name + "'");
}

}  // namespace fredholm
