#include "fredholm/baselines.hpp"
#include "fredholm/errors.hpp"
#include "fredholm/functional.hpp"
#include "fredholm/problems.hpp"
#include "fredholm/rng.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace fredholm {
namespace {

TEST(Functional, AlphaZeroHasNoKlTerm) {
    std::mt19937_64 rng(31);
    const ParticleCloud c{testing::random_matrix(rng, 40, 1), 0};
    const ObservationSample y{testing::random_matrix(rng, 30, 1)};
    const GaussianConvolutionKernel k({0.3});
    const auto ref = ReferenceMeasure::flat(1);
    const KernelDensity dens(c);
    const auto est = g_hat(c, y, k, ref, 0.0, 0.0, dens);
    EXPECT_EQ(est.kl_term, 0.0);
    EXPECT_EQ(est.total, est.data_term);
}

TEST(Functional, SingleParticleSingleObservation) {
    const double x = 0.2, yv = 0.5;
    const ParticleCloud c{Matrix::Constant(1, 1, x), 0};
    const ObservationSample y{Matrix::Constant(1, 1, yv)};
    const GaussianConvolutionKernel k({0.3});
    const KernelDensity dens(Matrix::Constant(1, 1, x), BandwidthMatrix{{0.01}});
    const auto est = g_hat(c, y, k, ReferenceMeasure::flat(1), 0.0, 0.0, dens);
    EXPECT_NEAR(est.data_term, -std::log(k.eval({&x, 1}, {&yv, 1})), 1e-14);
}

TEST(Functional, NaiveOracle) {
    std::mt19937_64 rng(32);
    const ParticleCloud c{testing::random_matrix(rng, 25, 2), 0};
    const ObservationSample y{testing::random_matrix(rng, 15, 2)};
    const GaussianConvolutionKernel k({0.3, 0.4});
    const auto ref = ReferenceMeasure::gaussian({0.1, 0.0}, {0.5, 0.8});
    const KernelDensity dens(c);
    const double alpha = 0.3, eta = 0.01;
    const auto est = g_hat(c, y, k, ref, alpha, eta, dens, kDefaultDenomFloor, 2);

    double data = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        double mk = 0.0;
        for (Eigen::Index l = 0; l < c.size(); ++l) mk += k.eval(row_of(c.points, l), row_of(y.points, j));
        data -= std::log(mk / static_cast<double>(c.size()) + eta);
    }
    data /= static_cast<double>(y.size());
    double kl = 0.0;
    for (Eigen::Index l = 0; l < c.size(); ++l) kl += std::log(dens(row_of(c.points, l))) - ref.log_density(row_of(c.points, l));
    kl *= alpha / static_cast<double>(c.size());
    EXPECT_LE(testing::rel_err(est.data_term, data), 1e-12);
    EXPECT_LE(testing::rel_err(est.kl_term, kl), 1e-12);
    EXPECT_EQ(est.total, est.data_term + est.kl_term);
}

TEST(Functional, FloorFlagged) {
    const ParticleCloud c{Matrix::Constant(2, 1, 0.0), 0};
    const ObservationSample y{Matrix::Constant(1, 1, 100.0)};
    const GaussianConvolutionKernel k({0.01});
    const KernelDensity dens(Matrix::Constant(1, 1, 0.0), BandwidthMatrix{{1.0}});
    const auto est = g_hat(c, y, k, ReferenceMeasure::flat(1), 0.0, 0.0, dens);
    EXPECT_TRUE(est.floored);
    EXPECT_NEAR(est.data_term, -std::log(kDefaultDenomFloor), 1e-9);
}

TEST(Functional, FlatReferenceWithAlphaUnsupported) {
    std::mt19937_64 rng(33);
    const ParticleCloud c{testing::random_matrix(rng, 10, 1), 0};
    const KernelDensity dens(c);
    EXPECT_THROW(kl_term(c, ReferenceMeasure::flat(1), 0.1, dens), UnsupportedOperation);
}

TEST(Functional, KlTermVanishesForReferenceDraws) {
    const auto ref = ReferenceMeasure::gaussian({0.0}, {1.0});
    const std::size_t n = 10000;
    ParticleCloud c{Matrix(n, 1), 0};
    for (std::size_t k = 0; k < n; ++k) {
        KeyedStream rng(1, StreamRole::misc, 0, k);
        ref.sample(rng, row_of(c.points, static_cast<Eigen::Index>(k)));
    }
    const double alpha = 0.5;
    EXPECT_LE(std::abs(kl_term(c, ref, alpha, KernelDensity(c))), 0.05 * alpha);
}

TEST(Functional, ToyEstimateNearClosedForm) {
    const ExperimentPreset p = preset_toy_gaussian();
    const ObservationSample obs = p.sample_observations(10000, 3);
    const ReferenceMeasure ref = p.reference(obs);
    ToyGaussianSpec spec;
    spec.sigma_0_2 = ref.variances()[0];
    spec.alpha = 0.02;
    const double beta = toy_optimal_beta(spec);
    const std::size_t n = 2000;
    ParticleCloud c{Matrix(n, 1), 0};
    for (std::size_t k = 0; k < n; ++k) {
        KeyedStream rng(4, StreamRole::misc, 0, k);
        c.points(static_cast<Eigen::Index>(k), 0) = std::sqrt(beta) * (std::normal_distribution<double>()(rng));
    }
    const auto est = g_hat(c, obs, *p.kernel, ref, spec.alpha, 0.0, KernelDensity(c));
    const double exact = toy_closed_form_g(spec, beta);
    EXPECT_LE(std::abs(est.total - exact), 0.05 * std::abs(exact));
}

}  // namespace
}  // namespace fredholm
