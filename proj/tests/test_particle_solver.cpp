#include "fredholm/errors.hpp"
#include "fredholm/particle_solver.hpp"
#include "fredholm/problems.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace fredholm {
namespace {

/// k(x, y) = N(y; 0, 1): constant in x.
class ConstantInX final : public KernelModel {
public:
    explicit ConstantInX(std::size_t d) : KernelModel(d, 1, 1.0) {}
    std::string name() const override { return "constant"; }

protected:
    double eval_unchecked(const double*, const double* y) const override { return testing::normal_pdf(*y, 0, 1); }
    void grad1_unchecked(const double*, const double*, double* out) const override {
        for (std::size_t i = 0; i < dim_x(); ++i) out[i] = 0.0;
    }
};

Matrix naive_drift(const ParticleCloud& c, const ObservationSample& b, const KernelModel& k,
                   const ReferenceMeasure& ref, double alpha, double eta) {
    const Eigen::Index n = c.size(), m = b.size(), d = c.dim();
    Matrix out = Matrix::Zero(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            double lambda = 0.0;
            for (Eigen::Index l = 0; l < n; ++l) lambda += k.eval(row_of(c.points, l), row_of(b.points, j));
            lambda /= static_cast<double>(n);
            std::vector<double> g(static_cast<std::size_t>(d));
            k.grad1(row_of(c.points, i), row_of(b.points, j), g);
            for (Eigen::Index a = 0; a < d; ++a) out(i, a) += g[static_cast<std::size_t>(a)] / (lambda + eta) / static_cast<double>(m);
        }
        const auto gu = ref.grad_u(row_of(c.points, i));
        for (Eigen::Index a = 0; a < d; ++a) out(i, a) -= alpha * gu[static_cast<std::size_t>(a)];
    }
    return out;
}

TEST(Drift, ConstantKernelLeavesOnlyReferencePull) {
    std::mt19937_64 rng(41);
    const ParticleCloud c{testing::random_matrix(rng, 6, 2), 0};
    const ObservationSample b{testing::random_matrix(rng, 4, 1)};
    const ConstantInX k(2);
    const auto ref = ReferenceMeasure::gaussian({0, 0}, {1, 1});
    const auto ev = drift_empirical(c, b, k, ref, 0.3, 0.0);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        for (Eigen::Index a = 0; a < 2; ++a) EXPECT_DOUBLE_EQ(ev.drift(i, a), -0.3 * c.points(i, a));
    }
}

TEST(Drift, SingleParticleScore) {
    const GaussianConvolutionKernel k({0.3});
    const ParticleCloud c{Matrix::Constant(1, 1, 0.1), 0};
    const ObservationSample b{Matrix::Constant(1, 1, 0.4)};
    const auto ev = drift_empirical(c, b, k, ReferenceMeasure::flat(1), 0.0, 0.0);
    EXPECT_NEAR(ev.drift(0, 0), (0.4 - 0.1) / 0.09, 1e-12);
}

TEST(Drift, NaiveTripleLoopOracle) {
    std::mt19937_64 rng(42);
    const GaussianConvolutionKernel k({0.5, 0.7});
    const auto ref = ReferenceMeasure::gaussian({0.1, -0.2}, {0.6, 1.3});
    for (int rep = 0; rep < 10; ++rep) {
        const ParticleCloud c{testing::random_matrix(rng, 5, 2), 0};
        const ObservationSample b{testing::random_matrix(rng, 4, 2)};
        const double eta = rep % 2 == 0 ? 0.0 : 0.05;
        const auto ev = drift_empirical(c, b, k, ref, 0.2, eta);
        const Matrix expected = naive_drift(c, b, k, ref, 0.2, eta);
        for (Eigen::Index i = 0; i < 5; ++i) {
            for (Eigen::Index a = 0; a < 2; ++a) EXPECT_LE(testing::rel_err(ev.drift(i, a), expected(i, a)), 1e-12);
        }
    }
}

TEST(Drift, IndependentOfThreadCount) {
    std::mt19937_64 rng(43);
    const GaussianConvolutionKernel k({0.2});
    const ParticleCloud c{testing::random_matrix(rng, 301, 1), 0};
    const ObservationSample b{testing::random_matrix(rng, 257, 1)};
    const auto ref = ReferenceMeasure::gaussian({0}, {1});
    const auto one = drift_empirical(c, b, k, ref, 0.1, 0.0, kDefaultDenomFloor, 1);
    const auto four = drift_empirical(c, b, k, ref, 0.1, 0.0, kDefaultDenomFloor, 4);
    EXPECT_TRUE(one.drift == four.drift);
}

TEST(Drift, FloorKeepsFarObservationsFinite) {
    const GaussianConvolutionKernel k({0.01});
    const ParticleCloud c{Matrix::Constant(3, 1, 0.0), 0};
    const ObservationSample b{Matrix::Constant(1, 1, 50.0)};
    const auto ev = drift_empirical(c, b, k, ReferenceMeasure::flat(1), 0.0, 0.0);
    EXPECT_TRUE(ev.floored);
    EXPECT_TRUE(ev.drift.allFinite());
}

TEST(Drift, LinearGrowthBoundWithPositiveEta) {
    std::mt19937_64 rng(44);
    const GaussianConvolutionKernel k({0.3, 0.3});
    const auto ref = ReferenceMeasure::gaussian({0.5, -0.5}, {0.2, 0.4});
    const double alpha = 0.7, eta = 0.1;
    std::vector<double> zero(2, 0.0);
    const auto gu0 = ref.grad_u(zero);
    const double gu0_norm = std::hypot(gu0[0], gu0[1]);
    for (int rep = 0; rep < 20; ++rep) {
        const ParticleCloud c{testing::random_matrix(rng, 10, 2, -3, 3), 0};
        const ObservationSample b{testing::random_matrix(rng, 8, 2)};
        const auto ev = drift_empirical(c, b, k, ref, alpha, eta);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double xn = c.points.row(i).norm();
            const double bound = k.bound() / eta + alpha * ref.lipschitz() * xn + alpha * gu0_norm;
            EXPECT_LE(ev.drift.row(i).norm(), bound);
        }
    }
}

TEST(TamedStep, ZeroDriftIsPureDiffusion) {
    std::mt19937_64 rng(45);
    const ParticleCloud c{testing::random_matrix(rng, 4, 2), 3};
    const Matrix z = testing::random_matrix(rng, 4, 2);
    const auto next = tamed_step(c, Matrix::Zero(4, 2), 0.01, 0.5, z);
    const double scale = std::sqrt(2.0 * 0.5 * 0.01);
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index a = 0; a < 2; ++a) EXPECT_DOUBLE_EQ(next.points(i, a), c.points(i, a) + scale * z(i, a));
    }
    EXPECT_EQ(next.step_index, 4u);
}

TEST(TamedStep, HandEvaluatedIncrement) {
    const ParticleCloud c{Matrix::Zero(1, 2), 0};
    Matrix b(1, 2);
    b << 3.0, 4.0;
    const auto next = tamed_step(c, b, 0.1, 0.7, Matrix::Zero(1, 2));
    EXPECT_NEAR(next.points(0, 0), 0.2, 1e-15);
    EXPECT_NEAR(next.points(0, 1), 0.4 / 1.5, 1e-15);
}

TEST(TamedStep, IncrementBound) {
    std::mt19937_64 rng(46);
    for (double scale : {1e-3, 1.0, 1e3, 1e8}) {
        const ParticleCloud c{Matrix::Zero(50, 3), 0};
        const Matrix b = scale * testing::random_matrix(rng, 50, 3);
        const double gamma = 0.05;
        const auto next = tamed_step(c, b, gamma, 0.0, Matrix::Zero(50, 3));
        for (Eigen::Index i = 0; i < 50; ++i) {
            const double inc = next.points.row(i).norm();
            const double gb = gamma * b.row(i).norm();
            EXPECT_LT(inc, 1.0);
            EXPECT_LE(inc, gb);
            EXPECT_NEAR(inc, gb / (1.0 + gb), 1e-12);
        }
    }
}

TEST(TamedStep, NonFiniteIsNumericalFailure) {
    const ParticleCloud c{Matrix::Zero(2, 1), 0};
    Matrix b(2, 1);
    b << 0.0, std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(tamed_step(c, b, 0.1, 0.1, Matrix::Zero(2, 1)), NumericalFailure);
}

TEST(Minibatch, FullSampleWhenLargeEnough) {
    std::mt19937_64 rng(47);
    const ObservationSample s{testing::random_matrix(rng, 20, 2)};
    EXPECT_TRUE(draw_minibatch(s, 20, 1, 0).points == s.points);
    EXPECT_TRUE(draw_minibatch(s, 50, 1, 3).points == s.points);
}

TEST(Minibatch, DistinctRowsAndReproducible) {
    ObservationSample s{Matrix(100, 1)};
    for (int i = 0; i < 100; ++i) s.points(i, 0) = i;
    const auto a = draw_minibatch(s, 30, 7, 2);
    const auto b = draw_minibatch(s, 30, 7, 2);
    const auto c = draw_minibatch(s, 30, 7, 3);
    EXPECT_TRUE(a.points == b.points);
    EXPECT_FALSE(a.points == c.points);
    std::vector<double> v(a.points.data(), a.points.data() + 30);
    std::sort(v.begin(), v.end());
    EXPECT_EQ(std::adjacent_find(v.begin(), v.end()), v.end());
    const auto iid = draw_minibatch(s, 30, 7, 2, ResamplePolicy::iid);
    EXPECT_EQ(iid.size(), 30);
}

SolverConfig small_config() {
    SolverConfig cfg;
    cfg.alpha = 0.01;
    cfg.gamma = 1e-2;
    cfg.n_particles = 40;
    cfg.minibatch = 30;
    cfg.max_steps = 15;
    cfg.seed = 9;
    return cfg;
}

TEST(Run, ZeroStepsReturnsInit) {
    const auto p = preset_gaussian_mixture_1d();
    const auto obs = p.sample_observations(200, 1);
    const auto ref = p.reference(obs);
    auto cfg = small_config();
    cfg.max_steps = 0;
    const auto init = initialize(p.init, cfg.n_particles, 1, obs, ref);
    const auto res = run(cfg, *p.kernel, ref, init, obs);
    EXPECT_TRUE(res.cloud.points == init.points);
    EXPECT_EQ(res.trace.records.size(), 1u);
}

TEST(Run, DeterministicAndThreadIndependent) {
    const auto p = preset_gaussian_mixture_1d();
    const auto obs = p.sample_observations(200, 2);
    const auto ref = p.reference(obs);
    auto cfg = small_config();
    const auto init = initialize(p.init, cfg.n_particles, 2, obs, ref);
    const auto a = run(cfg, *p.kernel, ref, init, obs);
    cfg.threads = 3;
    const auto b = run(cfg, *p.kernel, ref, init, obs);
    EXPECT_TRUE(a.cloud.points == b.cloud.points);
    ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
    for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
        EXPECT_EQ(a.trace.records[i].drift_max, b.trace.records[i].drift_max);
        EXPECT_EQ(a.trace.records[i].estimate->total, b.trace.records[i].estimate->total);
    }
}

TEST(Run, ExchangeableUnderJointPermutation) {
    // Full batch and no interaction in the noise keys: permuting particles
    // together with their noise streams permutes the output.
    const GaussianConvolutionKernel k({0.3});
    const auto ref = ReferenceMeasure::gaussian({0}, {1});
    std::mt19937_64 rng(48);
    const ObservationSample obs{testing::random_matrix(rng, 20, 1)};
    const ParticleCloud init{testing::random_matrix(rng, 8, 1), 0};
    SolverConfig cfg = small_config();
    cfg.n_particles = 8;
    cfg.minibatch = 20;
    cfg.max_steps = 1;
    const auto base = run(cfg, k, ref, init, obs);
    const Matrix z = standard_noise(cfg.seed, 0, 8, 1);

    std::vector<Eigen::Index> perm{3, 1, 7, 0, 5, 2, 6, 4};
    ParticleCloud permuted{Matrix(8, 1), 0};
    Matrix zp(8, 1);
    for (Eigen::Index i = 0; i < 8; ++i) {
        permuted.points(i, 0) = init.points(perm[static_cast<std::size_t>(i)], 0);
        zp(i, 0) = z(perm[static_cast<std::size_t>(i)], 0);
    }
    const auto drift = drift_empirical(permuted, obs, k, ref, cfg.alpha, 0.0);
    const auto stepped = tamed_step(permuted, drift.drift, cfg.gamma, cfg.alpha, zp);
    for (Eigen::Index i = 0; i < 8; ++i) {
        EXPECT_NEAR(stepped.points(i, 0), base.cloud.points(perm[static_cast<std::size_t>(i)], 0), 1e-14);
    }
}

TEST(Run, OrnsteinUhlenbeckStationaryVariance) {
    const ConstantInX k(1);
    const auto ref = ReferenceMeasure::gaussian({0}, {1});
    const ObservationSample obs{Matrix::Zero(5, 1)};
    SolverConfig cfg;
    cfg.alpha = 1.0;
    cfg.gamma = 0.01;
    cfg.n_particles = 2000;
    cfg.minibatch = 5;
    cfg.max_steps = 600;
    cfg.monitor_every = 0;
    cfg.seed = 3;
    InitSpec spec;
    spec.kind = InitSpec::Kind::point;
    spec.point = {2.0};
    const auto init = initialize(spec, cfg.n_particles, 3, obs, ref);
    const auto res = run(cfg, k, ref, init, obs);
    const auto& last = res.trace.records.back();
    EXPECT_NEAR(last.mean[0], 0.0, 0.1);
    EXPECT_NEAR(last.variance[0], 1.0, 0.1);
}

TEST(Run, RejectsInvalidInputs) {
    const GaussianConvolutionKernel k({0.3});
    const auto ref = ReferenceMeasure::flat(1);
    const ObservationSample obs{Matrix::Zero(5, 1)};
    auto cfg = small_config();
    cfg.n_particles = 3;
    const ParticleCloud init{Matrix::Zero(3, 1), 0};
    EXPECT_THROW(run(cfg, k, ref, init, obs), InputError);  // alpha > 0 with flat reference
    cfg.alpha = 0.0;
    EXPECT_THROW(run(cfg, k, ref, init, ObservationSample{Matrix(0, 1)}), InputError);
    EXPECT_THROW(run(cfg, k, ref, ParticleCloud{Matrix::Zero(4, 1), 0}, obs), InputError);
    cfg.gamma = 0.0;
    EXPECT_THROW(run(cfg, k, ref, init, obs), InputError);
}

TEST(Run, NumericalFailureCarriesStep) {
    const GaussianConvolutionKernel k({0.3});
    const auto ref = ReferenceMeasure::flat(1);
    const ObservationSample obs{Matrix::Zero(5, 1)};
    auto cfg = small_config();
    cfg.alpha = 0.0;
    cfg.n_particles = 2;
    cfg.max_steps = 5;
    std::size_t calls = 0;
    const ParticleCloud init{Matrix::Zero(2, 1), 0};
    try {
        run(cfg, k, ref, init, obs, [&](const StepRecord&, const ParticleCloud&) {
            if (++calls == 3) throw NumericalFailure("injected", std::nullopt, 1);
        });
        FAIL();
    } catch (const NumericalFailure& e) {
        ASSERT_TRUE(e.step().has_value());
        EXPECT_EQ(*e.step(), 2u);
        EXPECT_EQ(*e.index(), 1u);
    }
}

TEST(Run, EarlyStopOnFlatFunctional) {
    const ConstantInX k(1);
    const auto ref = ReferenceMeasure::gaussian({0}, {1});
    const ObservationSample obs{Matrix::Zero(5, 1)};
    SolverConfig cfg;
    cfg.alpha = 0.0;
    cfg.n_particles = 50;
    cfg.minibatch = 5;
    cfg.max_steps = 500;
    cfg.early_stop = true;
    cfg.stop_window = 5;
    InitSpec spec;
    spec.kind = InitSpec::Kind::reference;
    const auto init = initialize(spec, cfg.n_particles, 1, obs, ref);
    const auto res = run(cfg, k, ref, init, obs);
    // With alpha = 0 and a constant kernel nothing moves, so Ĝ is flat.
    EXPECT_TRUE(res.trace.stopped_early);
    EXPECT_EQ(res.trace.records.size(), 10u);
}

TEST(Initialize, KindsProduceExpectedClouds) {
    ObservationSample obs{Matrix(10, 1)};
    for (int i = 0; i < 10; ++i) obs.points(i, 0) = i;
    const auto ref = ReferenceMeasure::gaussian({0}, {1});
    InitSpec s;
    s.kind = InitSpec::Kind::observations;
    s.shift = {-100.0};
    const auto a = initialize(s, 10, 1, obs, ref);
    std::vector<double> v(a.points.data(), a.points.data() + 10);
    std::sort(v.begin(), v.end());
    for (int i = 0; i < 10; ++i) EXPECT_EQ(v[static_cast<std::size_t>(i)], i - 100.0);

    s.kind = InitSpec::Kind::uniform_box;
    s.lo = {2.0};
    s.hi = {3.0};
    const auto b = initialize(s, 100, 1, obs, ref);
    EXPECT_GE(b.points.minCoeff(), 2.0);
    EXPECT_LE(b.points.maxCoeff(), 3.0);

    s.kind = InitSpec::Kind::point;
    s.point = {0.25};
    const auto c = initialize(s, 4, 1, obs, ref);
    EXPECT_TRUE((c.points.array() == 0.25).all());
}

}  // namespace
}  // namespace fredholm
